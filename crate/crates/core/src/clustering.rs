//! Parameter grids, little-endian ordering, clusters and their diagonal matrices.
//!
//! Multi-indices and ordinals in the public index maps are 1-based, as in the
//! usual mathematical notation `p = i₁ + (i₂−1)·m₁ + …`. Everything that
//! addresses storage (cluster ranges, column numbers) is 0-based.

use std::ops::Range;

use crate::error::{Error, Result};

/// Little-endian ordinal of a 1-based multi-index: the first index varies fastest.
pub fn linear_index(index: &[usize], dims: &[usize]) -> Result<usize> {
    if index.len() != dims.len() {
        return Err(Error::dim(format!(
            "multi-index of length {} for {} dimensions",
            index.len(),
            dims.len()
        )));
    }
    let mut p = 0;
    let mut stride = 1;
    for (&i, &m) in index.iter().zip(dims) {
        if i == 0 || i > m {
            return Err(Error::IndexOutOfRange(format!(
                "component {i} outside 1..={m}"
            )));
        }
        p += (i - 1) * stride;
        stride *= m;
    }
    Ok(p + 1)
}

/// Inverse of [`linear_index`].
pub fn multi_index(p: usize, dims: &[usize]) -> Result<Vec<usize>> {
    let total: usize = dims.iter().product();
    if p == 0 || p > total {
        return Err(Error::IndexOutOfRange(format!(
            "ordinal {p} outside 1..={total}"
        )));
    }
    let mut rest = p - 1;
    Ok(dims
        .iter()
        .map(|&m| {
            let i = rest % m;
            rest /= m;
            i + 1
        })
        .collect())
}

/// One parameter combination. Two-parameter grids fill `lambda` and `rho` with
/// the reference values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterPoint {
    pub mu: f64,
    pub nu: f64,
    pub lambda: f64,
    pub rho: f64,
}

/// Reference parameters `(μ_s, ν_f, λ_s, ρ_f)` baked into the constant operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub mu: f64,
    pub nu: f64,
    pub lambda: f64,
    pub rho: f64,
}

impl Reference {
    pub fn point(&self) -> ParameterPoint {
        ParameterPoint {
            mu: self.mu,
            nu: self.nu,
            lambda: self.lambda,
            rho: self.rho,
        }
    }
}

/// `n` equally spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Tensor grid over `(μ, ν)` or `(μ, ν, λ, ρ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGrid {
    axes: Vec<Vec<f64>>,
    reference: Reference,
}

impl ParameterGrid {
    pub fn two_parameter(mu: Vec<f64>, nu: Vec<f64>, reference: Reference) -> Result<Self> {
        Self::from_axes(vec![mu, nu], reference)
    }

    pub fn four_parameter(
        mu: Vec<f64>,
        nu: Vec<f64>,
        lambda: Vec<f64>,
        rho: Vec<f64>,
        reference: Reference,
    ) -> Result<Self> {
        Self::from_axes(vec![mu, nu, lambda, rho], reference)
    }

    fn from_axes(axes: Vec<Vec<f64>>, reference: Reference) -> Result<Self> {
        if axes.iter().any(|a| a.is_empty()) {
            return Err(Error::InvalidConfig("parameter axis with no values".into()));
        }
        let finite = axes.iter().flatten().all(|v| v.is_finite())
            && [reference.mu, reference.nu, reference.lambda, reference.rho]
                .iter()
                .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("non-finite parameter value".into()));
        }
        Ok(ParameterGrid { axes, reference })
    }

    pub fn dims(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    /// Total number of parameter combinations `m`.
    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_four_parameter(&self) -> bool {
        self.axes.len() == 4
    }

    pub fn axis(&self, k: usize) -> &[f64] {
        &self.axes[k]
    }

    pub fn reference(&self) -> Reference {
        self.reference
    }

    /// Parameters at 0-based column `col` (little-endian ordinal `col + 1`).
    pub fn point(&self, col: usize) -> Result<ParameterPoint> {
        let idx = multi_index(col + 1, &self.dims())?;
        Ok(self.point_at(&idx))
    }

    fn point_at(&self, idx: &[usize]) -> ParameterPoint {
        let r = self.reference;
        let get = |k: usize, default: f64| {
            self.axes.get(k).map_or(default, |a| a[idx[k] - 1])
        };
        ParameterPoint {
            mu: get(0, r.mu),
            nu: get(1, r.nu),
            lambda: get(2, r.lambda),
            rho: get(3, r.rho),
        }
    }

    /// 1-based multi-index of 0-based column `col`.
    pub fn multi_index_of(&self, col: usize) -> Result<Vec<usize>> {
        multi_index(col + 1, &self.dims())
    }

    pub fn points(&self) -> Vec<ParameterPoint> {
        (0..self.len())
            .map(|c| self.point(c).expect("column within grid"))
            .collect()
    }
}

/// A contiguous run of grid columns sharing one anchor and one cluster step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    /// 0-based cluster number `k − 1`.
    pub index: usize,
    /// 0-based grid columns in little-endian order.
    pub columns: Range<usize>,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Grid column of the upper median member: ordered position `⌊|I|/2⌋+1`.
    pub fn upper_median(&self) -> usize {
        self.columns.start + upper_median_offset(self.len())
    }

    /// 1-based multi-index of the upper median member.
    pub fn upper_median_index(&self, grid: &ParameterGrid) -> Result<Vec<usize>> {
        grid.multi_index_of(self.upper_median())
    }

    pub fn points(&self, grid: &ParameterGrid) -> Result<Vec<ParameterPoint>> {
        self.columns.clone().map(|c| grid.point(c)).collect()
    }
}

/// 0-based offset of the upper median within an ordered set of `len` members.
pub fn upper_median_offset(len: usize) -> usize {
    len / 2
}

/// Splits the grid into `k` contiguous clusters: `⌊m/K⌋` columns each, the last
/// one taking the remainder.
pub fn split_clusters(grid: &ParameterGrid, k: usize) -> Result<Vec<Cluster>> {
    split_range(grid.len(), k)
}

/// [`split_clusters`] on `m` abstract columns.
pub fn split_range(m: usize, k: usize) -> Result<Vec<Cluster>> {
    if k == 0 || k > m {
        return Err(Error::InvalidConfig(format!(
            "cluster count K = {k} must satisfy 1 <= K <= m = {m}"
        )));
    }
    let base = m / k;
    Ok((0..k)
        .map(|i| {
            let start = i * base;
            let end = if i + 1 == k { m } else { start + base };
            Cluster {
                index: i,
                columns: start..end,
            }
        })
        .collect())
}

/// Diagonals of the parameter matrices of one cluster, in member order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDiagonals {
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub rho: Vec<f64>,
    /// Products `νᵢ·ρᵢ`.
    pub nu_rho: Vec<f64>,
    pub mu_shift: Vec<f64>,
    pub nu_shift: Vec<f64>,
    pub lambda_shift: Vec<f64>,
    pub rho_shift: Vec<f64>,
    /// `νᵢρᵢ − ν_f ρ_f`.
    pub nu_rho_shift: Vec<f64>,
}

pub fn cluster_diagonals(grid: &ParameterGrid, cluster: &Cluster) -> Result<ClusterDiagonals> {
    let pts = cluster.points(grid)?;
    Ok(diagonals_of(&pts, grid.reference()))
}

pub fn diagonals_of(pts: &[ParameterPoint], r: Reference) -> ClusterDiagonals {
    let col = |f: &dyn Fn(&ParameterPoint) -> f64| pts.iter().map(f).collect::<Vec<_>>();
    ClusterDiagonals {
        mu: col(&|p| p.mu),
        nu: col(&|p| p.nu),
        lambda: col(&|p| p.lambda),
        rho: col(&|p| p.rho),
        nu_rho: col(&|p| p.nu * p.rho),
        mu_shift: col(&|p| p.mu - r.mu),
        nu_shift: col(&|p| p.nu - r.nu),
        lambda_shift: col(&|p| p.lambda - r.lambda),
        rho_shift: col(&|p| p.rho - r.rho),
        nu_rho_shift: col(&|p| p.nu * p.rho - r.nu * r.rho),
    }
}

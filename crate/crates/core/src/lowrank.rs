//! Factored low-rank matrices `X = U·Vᵀ` and the truncation operator.
//!
//! Nothing here forms the dense `M×n` matrix except [`LowRankMatrix::to_dense`].
//! Truncation works on the factors: thin QR of `U` and `V`, SVD of the small
//! core `R_U·R_Vᵀ`, then keep the leading singular triplets.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{thin_svd, SparseMatrix};

/// Singular values below this fraction of `σ₁` are dropped by [`LowRankMatrix::recompress`].
pub const RELATIVE_DROP: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct LowRankMatrix {
    u: DMatrix<f64>,
    v: DMatrix<f64>,
}

impl LowRankMatrix {
    pub fn new(u: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        if u.ncols() != v.ncols() {
            return Err(Error::dim(format!(
                "factor ranks differ: U has {} columns, V has {}",
                u.ncols(),
                v.ncols()
            )));
        }
        Ok(LowRankMatrix { u, v })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        LowRankMatrix {
            u: DMatrix::zeros(nrows, 0),
            v: DMatrix::zeros(ncols, 0),
        }
    }

    /// The rank-1 matrix `a·bᵀ`.
    pub fn from_outer(a: &[f64], b: &[f64]) -> Self {
        LowRankMatrix {
            u: DMatrix::from_column_slice(a.len(), 1, a),
            v: DMatrix::from_column_slice(b.len(), 1, b),
        }
    }

    /// Exact factorization of a dense matrix, dropping only zero singular values.
    pub fn from_dense(x: &DMatrix<f64>) -> Self {
        let svd = thin_svd(x);
        let keep = svd.singular_values.iter().take_while(|&&s| s > 0.0).count();
        let mut u = svd.u.columns(0, keep).into_owned();
        for (j, s) in svd.singular_values.iter().take(keep).enumerate() {
            u.column_mut(j).scale_mut(*s);
        }
        LowRankMatrix {
            u,
            v: svd.v.columns(0, keep).into_owned(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows(), self.ncols())
    }

    /// Number of stored factor columns (an upper bound on the true rank).
    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn into_factors(self) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.u, self.v)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.u * self.v.transpose()
    }

    /// Column `j` of the represented matrix, `U·(row j of V)ᵀ`.
    pub fn column(&self, j: usize) -> Result<Vec<f64>> {
        if j >= self.ncols() {
            return Err(Error::IndexOutOfRange(format!(
                "column {j} of matrix with {} columns",
                self.ncols()
            )));
        }
        let coeffs = self.v.row(j).transpose();
        Ok((&self.u * coeffs).as_slice().to_vec())
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::dim(format!(
                "low-rank shapes differ: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    /// Exact sum by factor concatenation; ranks add.
    pub fn add(&self, other: &Self) -> Result<Self> {
        Self::linear_combination(&[(1.0, self), (1.0, other)])
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Self::linear_combination(&[(1.0, self), (-1.0, other)])
    }

    pub fn scale(&self, alpha: f64) -> Self {
        LowRankMatrix {
            u: &self.u * alpha,
            v: self.v.clone(),
        }
    }

    /// `Σ αᵢ Xᵢ` by concatenating factors; no truncation.
    pub fn linear_combination(terms: &[(f64, &LowRankMatrix)]) -> Result<Self> {
        let Some((_, first)) = terms.first() else {
            return Err(Error::dim("empty linear combination"));
        };
        for (_, t) in terms {
            first.check_same_shape(t)?;
        }
        let rank: usize = terms.iter().map(|(_, t)| t.rank()).sum();
        let mut u = DMatrix::zeros(first.nrows(), rank);
        let mut v = DMatrix::zeros(first.ncols(), rank);
        let mut at = 0;
        for (alpha, t) in terms {
            let r = t.rank();
            u.columns_mut(at, r).copy_from(&(&t.u * *alpha));
            v.columns_mut(at, r).copy_from(&t.v);
            at += r;
        }
        Ok(LowRankMatrix { u, v })
    }

    /// `A·X·D` with `D = diag(d)` (identity when `d` is `None`), as `(A·U)·(D·V)ᵀ`.
    pub fn apply_operator(&self, a: &SparseMatrix, d: Option<&[f64]>) -> Result<Self> {
        if a.ncols() != self.nrows() {
            return Err(Error::dim(format!(
                "operator with {} columns applied to {} rows",
                a.ncols(),
                self.nrows()
            )));
        }
        let u = a.mul_dense(&self.u);
        let v = match d {
            Some(d) => self.scale_rows_of_v(d)?,
            None => self.v.clone(),
        };
        Ok(LowRankMatrix { u, v })
    }

    /// `X·diag(d)`.
    pub fn scale_columns(&self, d: &[f64]) -> Result<Self> {
        Ok(LowRankMatrix {
            u: self.u.clone(),
            v: self.scale_rows_of_v(d)?,
        })
    }

    fn scale_rows_of_v(&self, d: &[f64]) -> Result<DMatrix<f64>> {
        if d.len() != self.ncols() {
            return Err(Error::dim(format!(
                "diagonal of length {} for {} columns",
                d.len(),
                self.ncols()
            )));
        }
        let mut v = self.v.clone();
        for (i, di) in d.iter().enumerate() {
            v.row_mut(i).scale_mut(*di);
        }
        Ok(v)
    }

    /// Replaces the left factor by `f(U)`; used for block-identical left solves.
    pub fn map_left<F>(&self, f: F) -> Result<Self>
    where
        F: FnOnce(&DMatrix<f64>) -> Result<DMatrix<f64>>,
    {
        let u = f(&self.u)?;
        Self::new(u, self.v.clone())
    }

    /// Orthonormal-factor form `Q_U·core·Q_Vᵀ` of the represented matrix.
    fn qr_core(&self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let qu = self.u.clone().qr();
        let qv = self.v.clone().qr();
        let core = qu.r() * qv.r().transpose();
        (qu.q(), core, qv.q())
    }

    /// Singular values of the represented matrix, non-increasing.
    pub fn singular_values(&self) -> Vec<f64> {
        if self.rank() == 0 || self.nrows() == 0 || self.ncols() == 0 {
            return Vec::new();
        }
        let (_, core, _) = self.qr_core();
        thin_svd(&core).singular_values
    }

    /// Best Frobenius approximation of rank at most `max_rank`, additionally
    /// dropping singular values `≤ rel_drop·σ₁`.
    pub fn truncate_with(&self, max_rank: usize, rel_drop: f64) -> Self {
        if self.rank() == 0 || self.nrows() == 0 || self.ncols() == 0 || max_rank == 0 {
            return Self::zeros(self.nrows(), self.ncols());
        }
        let (qu, core, qv) = self.qr_core();
        let svd = thin_svd(&core);
        let sigma = &svd.singular_values;
        let cutoff = rel_drop * sigma[0];
        let keep = sigma
            .iter()
            .take(max_rank)
            .take_while(|&&s| s > cutoff && s > 0.0)
            .count();
        let mut w = svd.u.columns(0, keep).into_owned();
        for j in 0..keep {
            w.column_mut(j).scale_mut(sigma[j]);
        }
        LowRankMatrix {
            u: qu * w,
            v: qv * svd.v.columns(0, keep),
        }
    }

    /// The truncation operator `𝒯_R`: best Frobenius rank-`R` approximation.
    pub fn truncate(&self, max_rank: usize) -> Self {
        self.truncate_with(max_rank, 0.0)
    }

    /// Truncation used inside the iterative solvers: rank budget plus a relative
    /// drop of negligible singular values.
    pub fn recompress(&self, max_rank: usize) -> Self {
        self.truncate_with(max_rank, RELATIVE_DROP)
    }

    /// Frobenius norm from the triangular QR factors; avoids the cancellation a
    /// Gram-matrix formula suffers when `X` is a small difference of large terms.
    pub fn frobenius_norm(&self) -> f64 {
        if self.rank() == 0 || self.nrows() == 0 || self.ncols() == 0 {
            return 0.0;
        }
        self.qr_core().1.norm()
    }

    /// Frobenius inner product `trace(Xᵀ·Y)` via small Gram products.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        let gu = self.u.transpose() * &other.u;
        let gv = self.v.transpose() * &other.v;
        Ok(gu.component_mul(&gv).sum())
    }

    /// Column-wise Euclidean norms.
    pub fn column_norms(&self) -> Vec<f64> {
        let gram = self.u.transpose() * &self.u;
        (0..self.ncols())
            .map(|j| {
                let c = self.v.row(j).transpose();
                let q = (c.transpose() * &gram * &c)[(0, 0)];
                if q > 1e-20 * gram.trace().abs() * c.norm_squared() {
                    q.sqrt()
                } else {
                    // cancellation-prone regime: form the column
                    (&self.u * c).norm()
                }
            })
            .collect()
    }

    /// `[X₁ | X₂ | …]` with block-diagonal right factor; ranks add.
    pub fn hcat(blocks: &[LowRankMatrix]) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Err(Error::dim("empty block list"));
        };
        let m = first.nrows();
        if let Some(b) = blocks.iter().find(|b| b.nrows() != m) {
            return Err(Error::dim(format!(
                "block with {} rows among blocks with {m}",
                b.nrows()
            )));
        }
        let rank: usize = blocks.iter().map(|b| b.rank()).sum();
        let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
        let mut u = DMatrix::zeros(m, rank);
        let mut v = DMatrix::zeros(cols, rank);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            u.columns_mut(r0, b.rank()).copy_from(&b.u);
            v.view_mut((c0, r0), (b.ncols(), b.rank())).copy_from(&b.v);
            r0 += b.rank();
            c0 += b.ncols();
        }
        Ok(LowRankMatrix { u, v })
    }

    /// Columns `start..start+len` as a low-rank matrix with the same left factor.
    pub fn column_block(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.ncols() {
            return Err(Error::IndexOutOfRange(format!(
                "columns {start}..{} of matrix with {} columns",
                start + len,
                self.ncols()
            )));
        }
        Ok(LowRankMatrix {
            u: self.u.clone(),
            v: self.v.rows(start, len).into_owned(),
        })
    }
}

//! Estimation of the Chebyshev interval from preconditioned blocks on a
//! coarse instance.

use nalgebra::DMatrix;

use super::{ChebyshevParams, MeanPreconditioner};
use crate::clustering::{split_clusters, Cluster, ParameterGrid, ParameterPoint};
use crate::error::{Error, Result};
use crate::model::ParametricSystem;
use crate::newton::{newton_solve_single, NewtonOptions};

#[derive(Debug, Clone)]
pub struct SpectrumEstimate {
    pub params: ChebyshevParams,
    /// Eigenvalue magnitudes of every block that was analysed.
    pub magnitudes: Vec<Vec<f64>>,
    /// Blocks skipped because the eigenvalue iteration failed.
    pub skipped: usize,
}

/// Eigenvalue magnitudes of a dense square matrix, or `None` if the Schur
/// iteration does not converge.
fn eigen_magnitudes(a: &DMatrix<f64>) -> Option<Vec<f64>> {
    let schur = a.clone().try_schur(1e-14, 10_000)?;
    let mags: Vec<f64> = schur.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    mags.iter().all(|v| v.is_finite()).then_some(mags)
}

/// `d` and `c` from the smallest interval containing all eigenvalue
/// magnitudes of `blocks`. Blocks whose eigenvalues cannot be computed are
/// skipped with a warning.
pub fn chebyshev_params_from_blocks(blocks: &[DMatrix<f64>]) -> Result<SpectrumEstimate> {
    let mut magnitudes = Vec::new();
    let mut skipped = 0;
    for (i, b) in blocks.iter().enumerate() {
        match eigen_magnitudes(b) {
            Some(m) => magnitudes.push(m),
            None => {
                log::warn!("eigenvalues of block {i} did not converge; block skipped");
                skipped += 1;
            }
        }
    }
    let all = magnitudes.iter().flatten();
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Estimation("no block produced eigenvalues".into()));
    }
    let params = ChebyshevParams {
        c: 0.5 * (hi - lo),
        d: 0.5 * (hi + lo),
    };
    Ok(SpectrumEstimate {
        params,
        magnitudes,
        skipped,
    })
}

/// Grid columns of the members closest to the four `(μ, ν)` corners of the
/// cluster's bounding box, without duplicates.
pub fn corner_members(grid: &ParameterGrid, cluster: &Cluster) -> Result<Vec<usize>> {
    let pts = cluster.points(grid)?;
    let bounds = |f: fn(&ParameterPoint) -> f64| {
        pts.iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (mu_lo, mu_hi) = bounds(|p| p.mu);
    let (nu_lo, nu_hi) = bounds(|p| p.nu);
    let scale = |lo: f64, hi: f64| if hi > lo { hi - lo } else { 1.0 };
    let (smu, snu) = (scale(mu_lo, mu_hi), scale(nu_lo, nu_hi));
    let mut out = Vec::new();
    for (cm, cn) in [(mu_lo, nu_lo), (mu_hi, nu_lo), (mu_lo, nu_hi), (mu_hi, nu_hi)] {
        let dist = |p: &ParameterPoint| ((p.mu - cm) / smu).powi(2) + ((p.nu - cn) / snu).powi(2);
        let (best, _) = pts
            .iter()
            .enumerate()
            .min_by(|a, b| dist(a.1).total_cmp(&dist(b.1)))
            .expect("clusters are non-empty");
        let col = cluster.columns.start + best;
        if !out.contains(&col) {
            out.push(col);
        }
    }
    Ok(out)
}

/// Runs the anchor solves of the clustered method on a (coarse) system, forms
/// `P⁻¹·A(x̃; p)` densely for the corner members of every cluster and returns
/// the enclosing interval of their eigenvalue magnitudes.
pub fn estimate_chebyshev_params(
    sys: &ParametricSystem,
    grid: &ParameterGrid,
    clusters: usize,
    newton: &NewtonOptions,
) -> Result<SpectrumEstimate> {
    let mut blocks = Vec::new();
    let mut guess = sys.b_d.clone();
    for cluster in split_clusters(grid, clusters)? {
        let anchor_p = grid.point(cluster.upper_median())?;
        let anchor = newton_solve_single(sys, &anchor_p, &guess, newton).map_err(|e| {
            Error::AnchorFailed {
                cluster: cluster.index + 1,
                source: Box::new(e),
            }
        })?;
        let pts = cluster.points(grid)?;
        let precond = MeanPreconditioner::for_cluster(sys, &anchor.x, &pts)?;
        for col in corner_members(grid, &cluster)? {
            let a = sys.jacobian(&anchor.x, &grid.point(col)?).to_dense();
            blocks.push(precond.factorization().solve_dense(&a)?);
        }
        guess = anchor.x;
    }
    chebyshev_params_from_blocks(&blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{linspace, Reference};

    #[test]
    fn identity_blocks_give_unit_interval() {
        let est = chebyshev_params_from_blocks(&[DMatrix::identity(4, 4), DMatrix::identity(3, 3)]).unwrap();
        assert_eq!(est.params, ChebyshevParams { c: 0.0, d: 1.0 });
    }

    #[test]
    fn diagonal_blocks_recover_known_spectrum() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 0.8, 1.0]));
        let b = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.2, 1.5]));
        let est = chebyshev_params_from_blocks(&[a, b]).unwrap();
        assert!((est.params.c - 0.5).abs() <= 1e-12);
        assert!((est.params.d - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn no_blocks_is_an_error() {
        assert!(matches!(chebyshev_params_from_blocks(&[]), Err(Error::Estimation(_))));
    }

    #[test]
    fn corners_of_a_full_rectangle() {
        let r = Reference {
            mu: 0.0,
            nu: 0.0,
            lambda: 0.0,
            rho: 1.0,
        };
        let grid = ParameterGrid::two_parameter(linspace(0.0, 1.0, 4), linspace(0.0, 1.0, 3), r).unwrap();
        let all = Cluster {
            index: 0,
            columns: 0..12,
        };
        let mut c = corner_members(&grid, &all).unwrap();
        c.sort();
        assert_eq!(c, vec![0, 3, 8, 11]);
        // a run inside one ν row has only two distinct corners
        let row = Cluster {
            index: 0,
            columns: 4..8,
        };
        assert_eq!(corner_members(&grid, &row).unwrap().len(), 2);
    }
}

//! Block-identical left preconditioners `I ⊗ P`.

use nalgebra::DMatrix;

use crate::clustering::{ParameterPoint, Reference};
use crate::error::Result;
use crate::linalg::{LuFactorization, SparseMatrix};
use crate::lowrank::LowRankMatrix;
use crate::model::ParametricSystem;

/// A preconditioner applied to the left factor of a low-rank matrix.
pub trait LeftPreconditioner: Sync {
    /// `P⁻¹·U` for a dense block `U`.
    fn solve_block(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>>;

    /// `P⁻¹·X` in factored form; the rank is unchanged.
    fn apply(&self, x: &LowRankMatrix) -> Result<LowRankMatrix> {
        x.map_left(|u| self.solve_block(u))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPreconditioner;

impl LeftPreconditioner for IdentityPreconditioner {
    fn solve_block(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(u.clone())
    }
}

/// Parameters at the middle of the cluster's ranges.
///
/// The mean shifts are `μ̄ = (min(μᵢ−μ_s) + max(μᵢ−μ_s))/2` and likewise for
/// the other parameters; the returned point is `μ_s + μ̄`, …. For the
/// product `νρ` the midpoint of the products is matched by choosing
/// `ν = mid(νρ)/mid(ρ)`.
pub fn mean_point(pts: &[ParameterPoint], reference: Reference) -> ParameterPoint {
    let mid = |f: &dyn Fn(&ParameterPoint) -> f64, shift: f64| {
        let (lo, hi) = pts.iter().map(|p| f(p) - shift).fold(
            (f64::INFINITY, f64::NEG_INFINITY),
            |(lo, hi), v| (lo.min(v), hi.max(v)),
        );
        shift + 0.5 * (lo + hi)
    };
    let rho = mid(&|p| p.rho, reference.rho);
    let nu_rho = mid(&|p| p.nu * p.rho, reference.nu * reference.rho);
    ParameterPoint {
        mu: mid(&|p| p.mu, reference.mu),
        nu: if rho != 0.0 { nu_rho / rho } else { mid(&|p| p.nu, reference.nu) },
        lambda: mid(&|p| p.lambda, reference.lambda),
        rho,
    }
}

/// LU factorization of one `M×M` matrix applied to every column block.
#[derive(Debug, Clone)]
pub struct MeanPreconditioner {
    lu: LuFactorization,
    /// Parameters the matrix was assembled at, if it came from a system.
    pub point: Option<ParameterPoint>,
}

impl MeanPreconditioner {
    pub fn from_matrix(p: &SparseMatrix) -> Result<Self> {
        Ok(MeanPreconditioner {
            lu: LuFactorization::factor(p)?,
            point: None,
        })
    }

    /// `A(x̃; p̄)` with `p̄` the cluster midpoint from [`mean_point`].
    pub fn for_cluster(
        sys: &ParametricSystem,
        x_anchor: &[f64],
        pts: &[ParameterPoint],
    ) -> Result<Self> {
        let p = mean_point(pts, sys.reference);
        Ok(MeanPreconditioner {
            lu: LuFactorization::factor(&sys.jacobian(x_anchor, &p))?,
            point: Some(p),
        })
    }

    /// Same midpoint rule with the frozen-coefficient operator.
    pub fn for_cluster_picard(
        sys: &ParametricSystem,
        x_anchor: &[f64],
        pts: &[ParameterPoint],
    ) -> Result<Self> {
        let p = mean_point(pts, sys.reference);
        Ok(MeanPreconditioner {
            lu: LuFactorization::factor(&sys.picard_operator(x_anchor, &p))?,
            point: Some(p),
        })
    }

    pub fn factorization(&self) -> &LuFactorization {
        &self.lu
    }
}

impl LeftPreconditioner for MeanPreconditioner {
    fn solve_block(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.lu.solve_dense(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> Reference {
        Reference {
            mu: 1.0,
            nu: 0.5,
            lambda: 2.0,
            rho: 1.0,
        }
    }

    #[test]
    fn symmetric_range_has_zero_mean_shift() {
        let pts: Vec<ParameterPoint> = [0.8, 0.9, 1.2]
            .iter()
            .map(|&mu| ParameterPoint {
                mu,
                nu: 0.5,
                lambda: 2.0,
                rho: 1.0,
            })
            .collect();
        let p = mean_point(&pts, reference());
        assert!((p.mu - 1.0).abs() <= 1e-15);
        assert_eq!(p.nu, 0.5);
        assert_eq!(p.lambda, 2.0);
    }

    #[test]
    fn mean_shift_formula() {
        let pts: Vec<ParameterPoint> = [(1.5, 0.2), (2.5, 0.6), (2.0, 0.4)]
            .iter()
            .map(|&(mu, nu)| ParameterPoint {
                mu,
                nu,
                lambda: 2.0,
                rho: 1.0,
            })
            .collect();
        let p = mean_point(&pts, reference());
        // shifts μ−μ_s ∈ {0.5, 1.5, 1.0} → mean 1.0; ν−ν_f ∈ {−0.3, 0.1, −0.1} → −0.1
        assert!((p.mu - 1.0 - 1.0).abs() <= 1e-15);
        assert!((p.nu - 0.5 + 0.1).abs() <= 1e-15);
    }

    #[test]
    fn identity_matrix_preconditioner_is_identity() {
        let p = MeanPreconditioner::from_matrix(&SparseMatrix::identity(4)).unwrap();
        let x = LowRankMatrix::from_outer(&[1.0, 2.0, 3.0, 4.0], &[1.0, -1.0]);
        assert_eq!(p.apply(&x).unwrap().to_dense(), x.to_dense());
        assert_eq!(IdentityPreconditioner.apply(&x).unwrap(), x);
    }

    #[test]
    fn dense_comparison() {
        let a = SparseMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 4.0), (0, 1, 1.0), (1, 1, 3.0), (2, 0, -1.0), (2, 2, 2.0)],
        )
        .unwrap();
        let p = MeanPreconditioner::from_matrix(&a).unwrap();
        let x = LowRankMatrix::from_outer(&[1.0, 2.0, 3.0], &[0.5, 2.0]);
        let got = p.apply(&x).unwrap().to_dense();
        let oracle = a.to_dense().lu().solve(&x.to_dense()).unwrap();
        assert!((got - oracle).norm() <= 1e-12);
    }
}

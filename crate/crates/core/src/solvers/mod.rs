//! Low-rank iterative solvers for cluster matrix equations.
//!
//! Both solvers work on the left-preconditioned equation `P⁻¹·L(X) = P⁻¹·B`
//! where `P` acts identically on every column. All iterates and basis
//! matrices stay in factored form and are recompressed to the rank budget
//! after every operator application and every linear combination. Convergence
//! is always confirmed with an untruncated ("honest") residual.

mod chebyshev;
mod estimate;
mod gmrest;
mod preconditioner;

pub use chebyshev::{chebyshev_contraction, chebyshevt, ChebyshevParams};
pub use estimate::{
    chebyshev_params_from_blocks, corner_members, estimate_chebyshev_params, SpectrumEstimate,
};
pub use gmrest::gmrest;
pub use preconditioner::{mean_point, IdentityPreconditioner, LeftPreconditioner, MeanPreconditioner};

use crate::error::Result;
use crate::lowrank::LowRankMatrix;
use crate::newton::MatrixEquationSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Rank budget `R` for iterates and basis matrices.
    pub rank: usize,
    /// Iterations per cycle before the residual is recomputed honestly.
    pub restart: usize,
    pub max_restarts: usize,
    /// Target for the preconditioned relative residual.
    pub tol: f64,
    /// Record one [`TraceRow`] per cycle.
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rank: 10,
            restart: 6,
            max_restarts: 1,
            tol: 1e-8,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    /// Honest preconditioned relative residual.
    pub residual: f64,
    pub rank: usize,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub x: LowRankMatrix,
    pub iterations: usize,
    /// Honest relative residual `≤ 2·tol`.
    pub converged: bool,
    /// Honest preconditioned relative residual of `x`.
    pub residual: f64,
    /// Residual reduction per cycle fell below 1 %, or the iteration diverged.
    pub stagnated: bool,
    pub trace: Vec<TraceRow>,
}

/// The left operator of `spec` applied to `x`, without truncation.
pub fn apply_equation_operator(spec: &MatrixEquationSpec, x: &LowRankMatrix) -> Result<LowRankMatrix> {
    spec.apply(x)
}

pub fn apply_preconditioner<P: LeftPreconditioner + ?Sized>(
    p: &P,
    x: &LowRankMatrix,
) -> Result<LowRankMatrix> {
    p.apply(x)
}

/// `P⁻¹(B − L(X))` without truncation, and its Frobenius norm.
pub(crate) fn honest_residual<P: LeftPreconditioner + ?Sized>(
    spec: &MatrixEquationSpec,
    p: &P,
    x: &LowRankMatrix,
) -> Result<(LowRankMatrix, f64)> {
    let r = p.apply(&spec.residual(x)?)?;
    let norm = r.frobenius_norm();
    Ok((r, norm))
}

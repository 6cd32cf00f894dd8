//! Chebyshev semi-iteration in truncated low-rank arithmetic.
//!
//! For a preconditioned operator with spectrum in the real interval
//! `[d − c, d + c]`, `0 ≤ c < d`, the three-term recurrence
//!
//! ```text
//! σ = d/c,  ρ₀ = 1/σ,  D₀ = r₀/d
//! ρₖ = 1/(2σ − ρₖ₋₁),  Dₖ = ρₖρₖ₋₁·Dₖ₋₁ + (2ρₖ/c)·rₖ
//! xₖ₊₁ = xₖ + Dₖ,  rₖ₊₁ = rₖ − P⁻¹L(Dₖ)
//! ```
//!
//! minimizes the worst-case error polynomial on the interval. With `c = 0` it
//! reduces to Richardson iteration with step `1/d`.

use super::{honest_residual, LeftPreconditioner, SolveOutcome, SolverOptions, TraceRow};
use crate::error::{Error, Result};
use crate::lowrank::LowRankMatrix;
use crate::newton::MatrixEquationSpec;

/// Growth of the honest residual over one cycle that counts as divergence.
const DIVERGENCE: f64 = 10.0;

/// Center `d` and half-width `c` of the assumed spectral interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChebyshevParams {
    pub c: f64,
    pub d: f64,
}

impl ChebyshevParams {
    pub fn new(c: f64, d: f64) -> Result<Self> {
        if !(c >= 0.0 && d > c && d.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "Chebyshev parameters need d > c >= 0, got c = {c}, d = {d}"
            )));
        }
        Ok(ChebyshevParams { c, d })
    }
}

/// Asymptotic error contraction per iteration, `c / (d + √(d² − c²))`.
pub fn chebyshev_contraction(params: &ChebyshevParams) -> f64 {
    let ChebyshevParams { c, d } = *params;
    c / (d + (d * d - c * c).sqrt())
}

pub fn chebyshevt<P: LeftPreconditioner + ?Sized>(
    spec: &MatrixEquationSpec,
    precond: &P,
    params: &ChebyshevParams,
    opts: &SolverOptions,
) -> Result<SolveOutcome> {
    let params = ChebyshevParams::new(params.c, params.d)?;
    if opts.tol <= 0.0 || opts.rank == 0 || opts.restart == 0 {
        return Err(Error::InvalidConfig(
            "solver needs tol > 0, rank >= 1 and restart >= 1".into(),
        ));
    }
    let (m, n) = spec.shape();
    let mut x = LowRankMatrix::zeros(m, n);
    let beta0 = precond.apply(spec.rhs())?.frobenius_norm();
    if beta0 == 0.0 {
        return Ok(SolveOutcome {
            x,
            iterations: 0,
            converged: true,
            residual: 0.0,
            stagnated: false,
            trace: Vec::new(),
        });
    }

    let ChebyshevParams { c, d } = params;
    let mut iterations = 0;
    let mut trace = Vec::new();
    let mut best = (x.clone(), f64::INFINITY);
    let mut stagnated = false;
    let mut cycle_start = f64::INFINITY;
    for cycle in 0..=opts.max_restarts + 1 {
        let (r, r_norm) = honest_residual(spec, precond, &x)?;
        let rel = r_norm / beta0;
        if opts.trace {
            trace.push(TraceRow {
                iteration: iterations,
                residual: rel,
                rank: x.rank(),
            });
        }
        if rel < best.1 {
            best = (x.clone(), rel);
        }
        if rel > DIVERGENCE * cycle_start {
            stagnated = true;
            break;
        }
        if rel <= opts.tol || cycle > opts.max_restarts {
            break;
        }
        cycle_start = rel;

        let mut r = r.recompress(opts.rank);
        let mut dir = r.scale(1.0 / d);
        let sigma = if c > 0.0 { d / c } else { f64::INFINITY };
        let mut rho = if c > 0.0 { 1.0 / sigma } else { 0.0 };
        for k in 0..opts.restart {
            if k > 0 {
                if c > 0.0 {
                    let rho_next = 1.0 / (2.0 * sigma - rho);
                    dir = LowRankMatrix::linear_combination(&[
                        (rho_next * rho, &dir),
                        (2.0 * rho_next / c, &r),
                    ])?
                    .recompress(opts.rank);
                    rho = rho_next;
                } else {
                    dir = r.scale(1.0 / d);
                }
            }
            x = x.add(&dir)?.recompress(opts.rank);
            let ad = precond.apply(&spec.apply(&dir)?)?;
            r = r.sub(&ad)?.recompress(opts.rank);
            iterations += 1;
            if r.frobenius_norm() / beta0 <= opts.tol {
                break;
            }
        }
    }

    let (x, residual) = best;
    Ok(SolveOutcome {
        x,
        iterations,
        converged: residual <= 2.0 * opts.tol,
        residual,
        stagnated,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SparseMatrix;
    use crate::newton::{EquationTerm, RightFactor};
    use crate::solvers::IdentityPreconditioner;

    fn diagonal_spec(diag: &[f64], rhs: LowRankMatrix) -> MatrixEquationSpec {
        MatrixEquationSpec::new(
            vec![EquationTerm::new(
                "D",
                SparseMatrix::from_diagonal(diag),
                RightFactor::Identity,
            )],
            rhs,
        )
        .unwrap()
    }

    #[test]
    fn identity_operator_converges_in_one_step() {
        let rhs = LowRankMatrix::from_outer(&[1.0, 2.0, 3.0], &[1.0, 1.0]);
        let spec = diagonal_spec(&[1.0; 3], rhs.clone());
        let out = chebyshevt(
            &spec,
            &IdentityPreconditioner,
            &ChebyshevParams { c: 0.0, d: 1.0 },
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
        assert!((out.x.to_dense() - rhs.to_dense()).norm() <= 1e-14);
    }

    #[test]
    fn contraction_follows_scalar_recurrence() {
        // spectrum spread over [0.9, 1.1]
        let m = 21;
        let diag: Vec<f64> = (0..m).map(|i| 0.9 + 0.2 * i as f64 / (m - 1) as f64).collect();
        let rhs = LowRankMatrix::from_outer(&vec![1.0; m], &[1.0]);
        let spec = diagonal_spec(&diag, rhs);
        let params = ChebyshevParams { c: 0.1, d: 1.0 };
        let rate = chebyshev_contraction(&params);
        let k = 6;
        let out = chebyshevt(
            &spec,
            &IdentityPreconditioner,
            &params,
            &SolverOptions {
                rank: 1,
                restart: k,
                max_restarts: 0,
                tol: 1e-300,
                trace: false,
            },
        )
        .unwrap();
        // error bound of the scaled Chebyshev polynomial: 2ρᵏ/(1+ρ²ᵏ)
        let bound = 2.0 * rate.powi(k as i32) / (1.0 + rate.powi(2 * k as i32));
        let x = out.x.to_dense();
        let err = (0..m)
            .map(|i| (x[(i, 0)] - 1.0 / diag[i]).abs() * diag[i])
            .fold(0.0f64, f64::max);
        // the bound is attained at the interval ends, so allow roundoff only
        assert!(err <= bound * (1.0 + 1e-6), "err {err} bound {bound}");
        assert!(rate < 0.0502);
    }

    #[test]
    fn invalid_interval_is_rejected() {
        assert!(ChebyshevParams::new(1.0, 1.0).is_err());
        assert!(ChebyshevParams::new(-0.1, 1.0).is_err());
    }
}

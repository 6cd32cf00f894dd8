//! Restarted GMRES in truncated low-rank arithmetic.

use nalgebra::{DMatrix, DVector};

use super::{honest_residual, LeftPreconditioner, SolveOutcome, SolverOptions, TraceRow};
use crate::error::{Error, Result};
use crate::lowrank::LowRankMatrix;
use crate::newton::MatrixEquationSpec;

/// A cycle must reduce the honest residual by at least this factor.
const STAGNATION: f64 = 0.99;

/// Solves `P⁻¹·L(X) = P⁻¹·B` by restarted GMRES with Frobenius inner products.
///
/// Every Krylov matrix is recompressed to `opts.rank` after the operator
/// application and after each modified Gram–Schmidt update; orthogonalization
/// is against the truncated basis. Each cycle starts from the honest residual.
pub fn gmrest<P: LeftPreconditioner + ?Sized>(
    spec: &MatrixEquationSpec,
    precond: &P,
    opts: &SolverOptions,
) -> Result<SolveOutcome> {
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

    let mut iterations = 0;
    let mut trace = Vec::new();
    let mut best = (x.clone(), f64::INFINITY);
    let mut stagnated = false;
    let mut previous = f64::INFINITY;
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
        if rel <= opts.tol || cycle > opts.max_restarts {
            break;
        }
        if rel > STAGNATION * previous {
            stagnated = true;
            break;
        }
        previous = rel;

        let r = r.recompress(opts.rank);
        let beta = r.frobenius_norm();
        if beta == 0.0 {
            break;
        }
        let k = opts.restart;
        let mut basis = vec![r.scale(1.0 / beta)];
        let mut h = DMatrix::<f64>::zeros(k + 1, k);
        let mut g = DVector::<f64>::zeros(k + 1);
        g[0] = beta;
        let mut givens: Vec<(f64, f64)> = Vec::with_capacity(k);
        let mut used = 0;
        for j in 0..k {
            let mut w = precond.apply(&spec.apply(&basis[j])?)?.recompress(opts.rank);
            for (i, v) in basis.iter().enumerate() {
                let hij = w.inner(v)?;
                h[(i, j)] = hij;
                w = LowRankMatrix::linear_combination(&[(1.0, &w), (-hij, v)])?.recompress(opts.rank);
            }
            let hnext = w.frobenius_norm();
            h[(j + 1, j)] = hnext;
            for (i, &(c, s)) in givens.iter().enumerate() {
                let (a, b) = (h[(i, j)], h[(i + 1, j)]);
                h[(i, j)] = c * a + s * b;
                h[(i + 1, j)] = -s * a + c * b;
            }
            let (a, b) = (h[(j, j)], h[(j + 1, j)]);
            let rad = a.hypot(b);
            let (c, s) = if rad == 0.0 { (1.0, 0.0) } else { (a / rad, b / rad) };
            givens.push((c, s));
            h[(j, j)] = rad;
            h[(j + 1, j)] = 0.0;
            g[j + 1] = -s * g[j];
            g[j] *= c;
            iterations += 1;
            used = j + 1;
            if hnext <= 1e-14 * beta {
                // lucky breakdown: the honest check at the next cycle decides
                break;
            }
            if g[j + 1].abs() / beta0 <= opts.tol {
                break;
            }
            basis.push(w.scale(1.0 / hnext));
        }
        let y = solve_upper(&h, &g, used);
        let mut terms: Vec<(f64, &LowRankMatrix)> = vec![(1.0, &x)];
        terms.extend(y.iter().zip(&basis).map(|(&c, v)| (c, v)));
        x = LowRankMatrix::linear_combination(&terms)?.recompress(opts.rank);
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

/// Back substitution with the leading `k×k` triangle of `h`.
fn solve_upper(h: &DMatrix<f64>, g: &DVector<f64>, k: usize) -> Vec<f64> {
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in i + 1..k {
            s -= h[(i, j)] * y[j];
        }
        y[i] = if h[(i, i)] != 0.0 { s / h[(i, i)] } else { 0.0 };
    }
    y
}

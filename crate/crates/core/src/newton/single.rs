//! Plain Newton iteration for one parameter combination.

use crate::clustering::ParameterPoint;
use crate::error::{Error, Result};
use crate::linalg::{norm2, LuFactorization, SparseMatrix};
use crate::model::ParametricSystem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Stop once `‖b_D − g(x)‖₂ ≤ tol`.
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-6,
            max_steps: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    /// Number of linear solves performed.
    pub steps: usize,
    /// Residual norms before each step and after the last one.
    pub history: Vec<f64>,
}

impl NewtonOutcome {
    pub fn residual_norm(&self) -> f64 {
        *self.history.last().expect("history holds the initial residual")
    }
}

/// Newton iteration `x ← x + A(x)⁻¹·r(x)` for a residual `r` with derivative `−A`.
pub fn newton_iterate<R, J>(
    x0: &[f64],
    opts: &NewtonOptions,
    mut residual: R,
    mut operator: J,
) -> Result<NewtonOutcome>
where
    R: FnMut(&[f64]) -> Vec<f64>,
    J: FnMut(&[f64]) -> SparseMatrix,
{
    if opts.tol <= 0.0 {
        return Err(Error::InvalidConfig("Newton tolerance must be positive".into()));
    }
    let mut x = x0.to_vec();
    let mut r = residual(&x);
    let mut history = vec![norm2(&r)];
    let mut steps = 0;
    while *history.last().unwrap() > opts.tol {
        if steps == opts.max_steps || !history.last().unwrap().is_finite() {
            return Err(Error::NewtonNotConverged {
                steps,
                residual: *history.last().unwrap(),
            });
        }
        let s = LuFactorization::factor(&operator(&x))?.solve(&r)?;
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        steps += 1;
        r = residual(&x);
        history.push(norm2(&r));
    }
    Ok(NewtonOutcome { x, steps, history })
}

/// Solves `g(x; p) = b_D` from `x0`, each step solving `A(x; p)·s = b_D − g(x; p)`.
pub fn newton_solve_single(
    sys: &ParametricSystem,
    p: &ParameterPoint,
    x0: &[f64],
    opts: &NewtonOptions,
) -> Result<NewtonOutcome> {
    newton_iterate(x0, opts, |x| sys.residual(x, p), |x| sys.jacobian(x, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_synthetic, SyntheticConfig};

    #[test]
    fn linear_system_takes_one_step() {
        let sys = generate_synthetic(&SyntheticConfig {
            nonlinear_scale: 0.0,
            ..SyntheticConfig::default()
        });
        let p = ParameterPoint {
            mu: 1.4,
            nu: 0.6,
            lambda: 1.0,
            rho: 1.0,
        };
        let out = newton_solve_single(&sys, &p, &sys.b_d, &NewtonOptions {
            tol: 1e-10,
            max_steps: 5,
        })
        .unwrap();
        assert_eq!(out.steps, 1);
    }

    #[test]
    fn manufactured_solution_is_recovered() {
        let mut sys = generate_synthetic(&SyntheticConfig::default());
        let x_star: Vec<f64> = (0..sys.dim()).map(|i| (0.37 * i as f64).sin()).collect();
        let p = ParameterPoint {
            mu: 0.8,
            nu: 1.3,
            lambda: 1.1,
            rho: 0.9,
        };
        sys.manufacture(&x_star, &p);
        let out = newton_solve_single(&sys, &p, &sys.b_d, &NewtonOptions {
            tol: 1e-10,
            max_steps: 20,
        })
        .unwrap();
        let err: f64 = out
            .x
            .iter()
            .zip(&x_star)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-8, "error {err}");
    }

    #[test]
    fn non_convergence_is_reported() {
        let sys = generate_synthetic(&SyntheticConfig::default());
        let p = sys.reference.point();
        let res = newton_solve_single(&sys, &p, &sys.b_d, &NewtonOptions {
            tol: 1e-300,
            max_steps: 2,
        });
        assert!(matches!(res, Err(Error::NewtonNotConverged { steps: 2, .. })));
    }
}

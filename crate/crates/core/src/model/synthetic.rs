//! Seeded random instances with the full operator decomposition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BilinearTerm, ParametricSystem, QuadraticForm};
use crate::clustering::{ParameterPoint, Reference};
use crate::linalg::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub dim: usize,
    /// Probability of a structural nonzero per entry.
    pub density: f64,
    /// Magnitude of the quadratic terms; `0` gives a linear system.
    pub nonlinear_scale: f64,
    pub reference: Reference,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 0,
            dim: 50,
            density: 0.05,
            nonlinear_scale: 0.05,
            reference: Reference {
                mu: 1.0,
                nu: 1.0,
                lambda: 1.0,
                rho: 1.0,
            },
        }
    }
}

fn random_sparse(rng: &mut ChaCha8Rng, m: usize, density: f64) -> Vec<(usize, usize, f64)> {
    let mut trip = Vec::new();
    for j in 0..m {
        for i in 0..m {
            if rng.random_bool(density) {
                trip.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
    }
    trip
}

fn abs_row_sums(m: usize, trip: &[(usize, usize, f64)]) -> Vec<f64> {
    let mut s = vec![0.0; m];
    for &(i, _, v) in trip {
        s[i] += v.abs();
    }
    s
}

/// Deterministic random system: `A₀` strictly diagonally dominant with a
/// margin covering the parameter-dependent blocks, quadratic pieces
/// `N(x) = s·C·(x ⊙ Bx)`.
///
/// # Panics
/// If `dim < 2` or `density` is outside `[0, 1]`.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> ParametricSystem {
    assert!(cfg.dim >= 2, "synthetic instance needs at least two unknowns");
    assert!((0.0..=1.0).contains(&cfg.density), "density must lie in [0, 1]");
    let m = cfg.dim;
    let r = cfg.reference;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let blocks: Vec<Vec<(usize, usize, f64)>> = (0..3)
        .map(|_| {
            random_sparse(&mut rng, m, cfg.density)
                .into_iter()
                .map(|(i, j, v)| (i, j, 0.2 * v))
                .collect()
        })
        .collect();
    let a1 = SparseMatrix::from_triplets(m, m, &blocks[0]).expect("indices in range");
    let a2 = SparseMatrix::from_triplets(m, m, &blocks[1]).expect("indices in range");
    let a3 = SparseMatrix::from_triplets(m, m, &blocks[2]).expect("indices in range");

    let mut base: Vec<(usize, usize, f64)> = random_sparse(&mut rng, m, cfg.density)
        .into_iter()
        .filter(|&(i, j, _)| i != j)
        .collect();
    let mut margin = abs_row_sums(m, &base);
    for b in &blocks {
        // parameters may move a few units away from the reference
        for (s, t) in margin.iter_mut().zip(abs_row_sums(m, b)) {
            *s += 4.0 * t;
        }
    }
    for (i, s) in margin.iter().enumerate() {
        base.push((i, i, s + 2.0 + rng.random_range(0.0..1.0)));
    }
    let constant = SparseMatrix::from_triplets(m, m, &base).expect("indices in range");
    let a0 = SparseMatrix::linear_combination(&[
        (1.0, &constant),
        (r.mu, &a1),
        (r.nu * r.rho, &a2),
        (r.lambda, &a3),
    ])
    .expect("equal shapes");

    let mut quadratic = || {
        if cfg.nonlinear_scale == 0.0 {
            return QuadraticForm::zero(m);
        }
        let mut b = random_sparse(&mut rng, m, cfg.density);
        b.extend((0..m).map(|i| (i, i, 1.0)));
        let mut c = random_sparse(&mut rng, m, cfg.density);
        c.extend((0..m).map(|i| (i, i, 1.0)));
        QuadraticForm::new(
            m,
            Some(SparseMatrix::from_triplets(m, m, &c).expect("indices in range")),
            vec![BilinearTerm {
                weight: cfg.nonlinear_scale,
                left: SparseMatrix::identity(m),
                right: SparseMatrix::from_triplets(m, m, &b).expect("indices in range"),
            }],
        )
    };
    let g_mu = quadratic();
    let g_lambda = quadratic();
    let g_rho = quadratic();

    // every tenth row carries no mass; the rest split into fluid and solid halves
    let mass_of = |fluid: bool| {
        let d: Vec<f64> = (0..m)
            .map(|i| {
                let in_fluid = i < m / 2;
                if i % 10 == 9 || in_fluid != fluid {
                    0.0
                } else {
                    1.0
                }
            })
            .collect();
        SparseMatrix::from_diagonal(&d)
    };
    let b_d = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();

    ParametricSystem {
        a0,
        a1,
        a2,
        a3,
        mass_fluid: mass_of(true),
        mass_solid: mass_of(false),
        b_d,
        g_mu,
        g_lambda,
        g_rho,
        reference: r,
        rho_s: 1.0,
    }
}

impl ParametricSystem {
    /// Replaces `b_D` by `g(x*; p)` so that `x*` solves the system at `p`.
    pub fn manufacture(&mut self, x_star: &[f64], p: &ParameterPoint) {
        self.b_d = self.apply(x_star, p);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_matrices() {
        let cfg = SyntheticConfig {
            seed: 11,
            ..SyntheticConfig::default()
        };
        let a = generate_synthetic(&cfg);
        let b = generate_synthetic(&cfg);
        assert_eq!(a.a0, b.a0);
        assert_eq!(a.a3, b.a3);
        assert_eq!(a.b_d, b.b_d);
        let c = generate_synthetic(&SyntheticConfig { seed: 12, ..cfg });
        assert_ne!(a.a0, c.a0);
    }

    #[test]
    fn nonzero_counts_follow_density() {
        let sys = generate_synthetic(&SyntheticConfig {
            seed: 5,
            dim: 50,
            density: 0.05,
            ..SyntheticConfig::default()
        });
        for op in [&sys.a1, &sys.a2, &sys.a3] {
            assert!((63..=187).contains(&op.nnz()), "nnz = {}", op.nnz());
        }
        assert!(sys.validate().is_ok());
    }

    #[test]
    fn manufactured_solution_has_zero_residual() {
        let mut sys = generate_synthetic(&SyntheticConfig::default());
        let x: Vec<f64> = (0..50).map(|i| (0.1 * i as f64).cos()).collect();
        let p = ParameterPoint {
            mu: 1.2,
            nu: 0.8,
            lambda: 1.0,
            rho: 1.0,
        };
        sys.manufacture(&x, &p);
        assert!(sys.residual_norm(&x, &p) <= 1e-13);
    }
}

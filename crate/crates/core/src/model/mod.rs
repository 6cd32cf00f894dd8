//! Parametric nonlinear systems with an affine parameter decomposition.
//!
//! A system of dimension `M` is the equation `g(x; p) = b_D` with
//!
//! ```text
//! g(x; μ,ν,λ,ρ) = A₀x + (μ−μ_s)A₁x + (νρ−ν_fρ_f)A₂x + (λ−λ_s)A₃x
//!                 + μ·g_μ(x) + λ·g_λ(x) + ρ·g_ρ(x)
//! ```
//!
//! where `A₀` already contains the reference contributions `μ_sA₁ + ν_fρ_fA₂ + λ_sA₃`
//! and every nonlinear piece is a quadratic form. The residual is `b_D − g(x; p)`.
//! Two-parameter problems keep `λ = λ_s` and `ρ = ρ_f`.

mod convection;
mod quadratic;
mod synthetic;

use std::path::Path;

pub use convection::{ConvectionDiffusion, ConvectionDiffusionConfig, LinearFunctional, Source};
pub use quadratic::{BilinearTerm, QuadraticForm};
pub use synthetic::{generate_synthetic, SyntheticConfig};

use crate::clustering::{ParameterPoint, Reference};
use crate::error::{Error, Result};
use crate::linalg::{norm2, write_matrix_market, SparseMatrix};

#[derive(Debug, Clone)]
pub struct ParametricSystem {
    pub a0: SparseMatrix,
    pub a1: SparseMatrix,
    pub a2: SparseMatrix,
    pub a3: SparseMatrix,
    /// Fluid mass operator, weighted by `ρ_f` in the time term.
    pub mass_fluid: SparseMatrix,
    /// Solid mass operator, weighted by `ρ_s` in the time term.
    pub mass_solid: SparseMatrix,
    pub b_d: Vec<f64>,
    pub g_mu: QuadraticForm,
    pub g_lambda: QuadraticForm,
    pub g_rho: QuadraticForm,
    pub reference: Reference,
    pub rho_s: f64,
}

impl ParametricSystem {
    /// Checks that all operators are `M×M` and vectors have length `M`.
    pub fn validate(&self) -> Result<()> {
        let m = self.dim();
        let ops = [
            ("A0", &self.a0),
            ("A1", &self.a1),
            ("A2", &self.a2),
            ("A3", &self.a3),
            ("fluid mass", &self.mass_fluid),
            ("solid mass", &self.mass_solid),
        ];
        for (name, op) in ops {
            if op.shape() != (m, m) {
                return Err(Error::dim(format!(
                    "{name} is {}x{}, expected {m}x{m}",
                    op.nrows(),
                    op.ncols()
                )));
            }
        }
        for (name, q) in [("g_mu", &self.g_mu), ("g_lambda", &self.g_lambda), ("g_rho", &self.g_rho)] {
            if q.dim() != m {
                return Err(Error::dim(format!("{name} has dimension {}, expected {m}", q.dim())));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.b_d.len()
    }

    fn check_len(&self, x: &[f64]) {
        assert_eq!(x.len(), self.dim(), "state length does not match system dimension");
    }

    /// Coefficients `(μ−μ_s, νρ−ν_fρ_f, λ−λ_s)` of `A₁, A₂, A₃`.
    pub fn linear_shifts(&self, p: &ParameterPoint) -> (f64, f64, f64) {
        let r = &self.reference;
        (p.mu - r.mu, p.nu * p.rho - r.nu * r.rho, p.lambda - r.lambda)
    }

    /// The operator value `g(x; p)`.
    pub fn apply(&self, x: &[f64], p: &ParameterPoint) -> Vec<f64> {
        self.check_len(x);
        let (dmu, dnr, dl) = self.linear_shifts(p);
        let mut y = self.a0.mul_vec(x);
        self.a1.mul_vec_acc(dmu, x, &mut y);
        self.a2.mul_vec_acc(dnr, x, &mut y);
        self.a3.mul_vec_acc(dl, x, &mut y);
        for (coef, q) in [(p.mu, &self.g_mu), (p.lambda, &self.g_lambda), (p.rho, &self.g_rho)] {
            if coef != 0.0 && !q.is_zero() {
                for (yi, ni) in y.iter_mut().zip(q.eval(x)) {
                    *yi += coef * ni;
                }
            }
        }
        y
    }

    /// `b_D − g(x; p)`.
    pub fn residual(&self, x: &[f64], p: &ParameterPoint) -> Vec<f64> {
        let g = self.apply(x, p);
        self.b_d.iter().zip(g).map(|(b, gi)| b - gi).collect()
    }

    pub fn residual_norm(&self, x: &[f64], p: &ParameterPoint) -> f64 {
        norm2(&self.residual(x, p))
    }

    /// Residual norm relative to the residual of the initial guess `b_D`.
    pub fn relative_residual(&self, x: &[f64], p: &ParameterPoint) -> f64 {
        let base = self.residual_norm(&self.b_d, p);
        let r = self.residual_norm(x, p);
        if base == 0.0 {
            r
        } else {
            r / base
        }
    }

    /// `A(x; p) = A₀ + (μ−μ_s)A₁ + (νρ−ν_fρ_f)A₂ + (λ−λ_s)A₃ + μJ_μ(x) + λJ_λ(x) + ρJ_ρ(x)`.
    pub fn jacobian(&self, x: &[f64], p: &ParameterPoint) -> SparseMatrix {
        self.check_len(x);
        self.linearization(p, |q| q.jacobian(x))
    }

    /// Same as [`Self::jacobian`] with the fixed-point operators `F_N(x)`.
    pub fn picard_operator(&self, x: &[f64], p: &ParameterPoint) -> SparseMatrix {
        self.check_len(x);
        self.linearization(p, |q| q.picard(x))
    }

    fn linearization<F>(&self, p: &ParameterPoint, lin: F) -> SparseMatrix
    where
        F: Fn(&QuadraticForm) -> SparseMatrix,
    {
        let (dmu, dnr, dl) = self.linear_shifts(p);
        let mut nonlinear = Vec::new();
        for (coef, q) in [(p.mu, &self.g_mu), (p.lambda, &self.g_lambda), (p.rho, &self.g_rho)] {
            if coef != 0.0 && !q.is_zero() {
                nonlinear.push((coef, lin(q)));
            }
        }
        let mut terms: Vec<(f64, &SparseMatrix)> =
            vec![(1.0, &self.a0), (dmu, &self.a1), (dnr, &self.a2), (dl, &self.a3)];
        terms.extend(nonlinear.iter().map(|(c, j)| (*c, j)));
        SparseMatrix::linear_combination(&terms).expect("operators validated at construction")
    }

    /// Time-term operator `ρ_f·A_t^f + ρ_s·A_t^s` for fluid density `rho`.
    pub fn mass(&self, rho: f64) -> SparseMatrix {
        SparseMatrix::linear_combination(&[(rho, &self.mass_fluid), (self.rho_s, &self.mass_solid)])
            .expect("operators validated at construction")
    }

    /// Rows without any mass entry; these are always treated fully implicitly.
    pub fn implicit_rows(&self) -> Vec<bool> {
        let mut has_mass = vec![false; self.dim()];
        for op in [&self.mass_fluid, &self.mass_solid] {
            for (i, _, v) in op.triplets() {
                if v != 0.0 {
                    has_mass[i] = true;
                }
            }
        }
        has_mass.into_iter().map(|h| !h).collect()
    }

    /// Same system with every nonlinear piece removed.
    pub fn linearized_copy(&self) -> Self {
        let m = self.dim();
        ParametricSystem {
            g_mu: QuadraticForm::zero(m),
            g_lambda: QuadraticForm::zero(m),
            g_rho: QuadraticForm::zero(m),
            ..self.clone()
        }
    }

    /// Writes `A0.mtx … A3.mtx`, the mass operators and `b_d.txt` into `dir`.
    pub fn dump_operators(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let ops = [
            ("A0", &self.a0),
            ("A1", &self.a1),
            ("A2", &self.a2),
            ("A3", &self.a3),
            ("mass_fluid", &self.mass_fluid),
            ("mass_solid", &self.mass_solid),
        ];
        for (name, op) in ops {
            let file = std::fs::File::create(dir.join(format!("{name}.mtx")))?;
            write_matrix_market(op, std::io::BufWriter::new(file))?;
        }
        let text: String = self.b_d.iter().map(|v| format!("{v}\n")).collect();
        std::fs::write(dir.join("b_d.txt"), text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance() -> ParametricSystem {
        generate_synthetic(&SyntheticConfig {
            seed: 3,
            dim: 30,
            density: 0.1,
            ..SyntheticConfig::default()
        })
    }

    #[test]
    fn affine_decomposition_four_parameter() {
        let sys = instance();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = ParameterPoint {
            mu: 1.3,
            nu: 0.7,
            lambda: 0.9,
            rho: 1.2,
        };
        let zero = ParameterPoint {
            mu: 0.0,
            nu: 0.0,
            lambda: 0.0,
            rho: 0.0,
        };
        let g0 = sys.apply(&x, &zero);
        let a1x = sys.a1.mul_vec(&x);
        let a2x = sys.a2.mul_vec(&x);
        let a3x = sys.a3.mul_vec(&x);
        let (gm, gl, gr) = (sys.g_mu.eval(&x), sys.g_lambda.eval(&x), sys.g_rho.eval(&x));
        let g = sys.apply(&x, &p);
        for i in 0..30 {
            let expect = g0[i]
                + p.mu * (a1x[i] + gm[i])
                + p.nu * p.rho * a2x[i]
                + p.lambda * (a3x[i] + gl[i])
                + p.rho * gr[i];
            assert!((g[i] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn jacobian_is_affine_in_mu() {
        let sys = instance();
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.3).sin()).collect();
        let p = sys.reference.point();
        let q = ParameterPoint { mu: p.mu + 0.25, ..p };
        let diff = sys.jacobian(&x, &q).to_dense() - sys.jacobian(&x, &p).to_dense();
        let expect = (sys.a1.to_dense() + sys.g_mu.jacobian(&x).to_dense()) * 0.25;
        assert!((diff - &expect).norm() <= 1e-12 * (1.0 + expect.norm()));
    }

    #[test]
    fn jacobian_at_zero_reference_is_a0() {
        let sys = instance();
        let x = vec![0.0; 30];
        let j = sys.jacobian(&x, &sys.reference.point()).to_dense();
        assert!((j - sys.a0.to_dense()).norm() <= 1e-14);
    }

    #[test]
    fn operators_round_trip_through_files() {
        let sys = instance();
        let dir = std::env::temp_dir().join(format!("lrnewton-dump-{}", std::process::id()));
        sys.dump_operators(&dir).unwrap();
        let f = std::fs::File::open(dir.join("A2.mtx")).unwrap();
        let a2 = crate::linalg::read_matrix_market(std::io::BufReader::new(f)).unwrap();
        assert_eq!(a2.to_dense(), sys.a2.to_dense());
        std::fs::remove_dir_all(&dir).ok();
    }
}

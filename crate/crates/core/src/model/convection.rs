//! Nonlinear convection–diffusion–reaction on the unit square.
//!
//! Finite differences on an `n×n` node grid including the boundary, `h = 1/(n−1)`,
//! node `(i, j)` at `(i·h, j·h)` stored at index `i + j·n`. Interior rows discretize
//!
//! ```text
//! −νρ·Δu + ρ·κ_ρ·u·∂ₓu + μ·(c₁u + κ_μ|∇u|²) + λ·(c₃·w·u + κ_λ·∂ₓu·∂ᵧu) = f
//! ```
//!
//! multiplied by `h²`, where `w` is the indicator of a rectangular "solid" box.
//! Boundary rows are identity rows of `A₀` and carry the Dirichlet values in `b_D`.
//! Boundary rows have no mass, so they are always treated implicitly in time.

use super::{BilinearTerm, ParametricSystem, QuadraticForm};
use crate::clustering::{ParameterPoint, Reference};
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    /// Constant interior source with a parabolic inflow profile on `x = 0`.
    Constant(f64),
    /// Source and boundary data of the exact solution `u = eˣ·sin(πy)` at the
    /// reference parameters.
    Manufactured,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvectionDiffusionConfig {
    pub n: usize,
    pub reference: Reference,
    pub rho_s: f64,
    /// `c₁`, coefficient of the μ-weighted reaction.
    pub reaction: f64,
    /// `c₃`, coefficient of the λ-weighted reaction inside the solid box.
    pub solid_reaction: f64,
    pub kappa_mu: f64,
    pub kappa_lambda: f64,
    pub kappa_rho: f64,
    /// Peak of the inflow profile `inflow·4y(1−y)`.
    pub inflow: f64,
    pub source: Source,
    /// `[x₀, x₁, y₀, y₁]` of the solid box.
    pub solid_box: [f64; 4],
}

impl Default for ConvectionDiffusionConfig {
    fn default() -> Self {
        ConvectionDiffusionConfig {
            n: 50,
            reference: Reference {
                mu: 1.0,
                nu: 0.04,
                lambda: 1.0,
                rho: 1.0,
            },
            rho_s: 1.0,
            reaction: 1.0,
            solid_reaction: 1.0,
            kappa_mu: 0.02,
            kappa_lambda: 0.05,
            kappa_rho: 1.0,
            inflow: 1.0,
            source: Source::Constant(1.0),
            solid_box: [0.4, 0.6, 0.2, 0.5],
        }
    }
}

/// A linear functional `J(x) = Σ wᵢxᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFunctional {
    pub name: String,
    pub weights: Vec<f64>,
}

impl LinearFunctional {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum()
    }
}

#[derive(Debug, Clone)]
pub struct ConvectionDiffusion {
    config: ConvectionDiffusionConfig,
    pub system: ParametricSystem,
}

fn exact(x: f64, y: f64) -> f64 {
    x.exp() * (std::f64::consts::PI * y).sin()
}

impl ConvectionDiffusion {
    pub fn build(config: ConvectionDiffusionConfig) -> Result<Self> {
        if config.n < 4 {
            return Err(Error::InvalidConfig(format!(
                "grid needs n >= 4 nodes per side, got {}",
                config.n
            )));
        }
        let system = assemble(&config)?;
        Ok(ConvectionDiffusion { config, system })
    }

    pub fn config(&self) -> &ConvectionDiffusionConfig {
        &self.config
    }

    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.config.n - 1) as f64
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + j * self.config.n
    }

    /// Same configuration with the mesh width halved (`2n − 1` nodes per side),
    /// so every coarse node is also a fine node.
    pub fn refined(&self) -> Result<Self> {
        Self::build(ConvectionDiffusionConfig {
            n: 2 * self.config.n - 1,
            ..self.config.clone()
        })
    }

    /// Nodal values of the manufactured exact solution.
    pub fn manufactured_solution(&self) -> Vec<f64> {
        let n = self.config.n;
        let h = self.h();
        (0..n * n)
            .map(|k| exact((k % n) as f64 * h, (k / n) as f64 * h))
            .collect()
    }

    /// Value at the grid node located at `(x, y)`.
    pub fn point_functional(&self, x: f64, y: f64) -> Result<LinearFunctional> {
        let n = self.config.n;
        let to_node = |c: f64| -> Option<usize> {
            let s = c * (n - 1) as f64;
            let r = s.round();
            ((s - r).abs() <= 1e-9 && (0.0..=(n - 1) as f64).contains(&r)).then_some(r as usize)
        };
        let (Some(i), Some(j)) = (to_node(x), to_node(y)) else {
            return Err(Error::InvalidConfig(format!(
                "point ({x}, {y}) is not a node of the {n}x{n} grid"
            )));
        };
        let mut weights = vec![0.0; n * n];
        weights[self.index(i, j)] = 1.0;
        Ok(LinearFunctional {
            name: format!("point({x},{y})"),
            weights,
        })
    }

    /// Trapezoidal approximation of `∫∫ u dx dy` over the unit square.
    pub fn integral_functional(&self) -> LinearFunctional {
        let n = self.config.n;
        let h = self.h();
        let edge = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let weights = (0..n * n)
            .map(|k| edge(k % n) * edge(k / n) * h * h)
            .collect();
        LinearFunctional {
            name: "integral".into(),
            weights,
        }
    }
}

fn assemble(cfg: &ConvectionDiffusionConfig) -> Result<ParametricSystem> {
    let n = cfg.n;
    let m = n * n;
    let h = 1.0 / (n - 1) as f64;
    let h2 = h * h;
    let idx = |i: usize, j: usize| i + j * n;
    let interior = |i: usize, j: usize| i > 0 && j > 0 && i < n - 1 && j < n - 1;
    let [bx0, bx1, by0, by1] = cfg.solid_box;
    let in_solid = |i: usize, j: usize| {
        let (x, y) = (i as f64 * h, j as f64 * h);
        x >= bx0 - 1e-12 && x <= bx1 + 1e-12 && y >= by0 - 1e-12 && y <= by1 + 1e-12
    };

    let mut lap = Vec::new();
    let mut dx = Vec::new();
    let mut dy = Vec::new();
    let mut bnd = Vec::new();
    let mut react = Vec::new();
    let mut solid_react = Vec::new();
    let mut mass_f = vec![0.0; m];
    let mut mass_s = vec![0.0; m];
    let mut out = vec![0.0; m];
    for j in 0..n {
        for i in 0..n {
            let k = idx(i, j);
            if !interior(i, j) {
                bnd.push((k, k, 1.0));
                continue;
            }
            // h²·(−Δ_h): row sums vanish
            lap.push((k, k, 4.0));
            for nb in [idx(i - 1, j), idx(i + 1, j), idx(i, j - 1), idx(i, j + 1)] {
                lap.push((k, nb, -1.0));
            }
            let c = 0.5 / h;
            dx.push((k, idx(i + 1, j), c));
            dx.push((k, idx(i - 1, j), -c));
            dy.push((k, idx(i, j + 1), c));
            dy.push((k, idx(i, j - 1), -c));
            react.push((k, k, cfg.reaction * h2));
            if in_solid(i, j) {
                solid_react.push((k, k, cfg.solid_reaction * h2));
                mass_s[k] = h2;
            } else {
                mass_f[k] = h2;
            }
            out[k] = h2;
        }
    }
    let sp = |t: &[(usize, usize, f64)]| SparseMatrix::from_triplets(m, m, t);
    let a1 = sp(&react)?;
    let a2 = sp(&lap)?;
    let a3 = sp(&solid_react)?;
    let boundary = sp(&bnd)?;
    let dx = sp(&dx)?;
    let dy = sp(&dy)?;
    let r = cfg.reference;
    let a0 = SparseMatrix::linear_combination(&[
        (1.0, &boundary),
        (r.mu, &a1),
        (r.nu * r.rho, &a2),
        (r.lambda, &a3),
    ])?;

    let output = SparseMatrix::from_diagonal(&out);
    let identity = SparseMatrix::identity(m);
    let g_rho = QuadraticForm::new(
        m,
        Some(output.clone()),
        vec![BilinearTerm {
            weight: cfg.kappa_rho,
            left: identity,
            right: dx.clone(),
        }],
    );
    let g_mu = QuadraticForm::new(
        m,
        Some(output.clone()),
        vec![
            BilinearTerm {
                weight: cfg.kappa_mu,
                left: dx.clone(),
                right: dx.clone(),
            },
            BilinearTerm {
                weight: cfg.kappa_mu,
                left: dy.clone(),
                right: dy.clone(),
            },
        ],
    );
    let g_lambda = QuadraticForm::new(
        m,
        Some(output),
        vec![BilinearTerm {
            weight: cfg.kappa_lambda,
            left: dx,
            right: dy,
        }],
    );

    let mut b_d = vec![0.0; m];
    for j in 0..n {
        for i in 0..n {
            let k = idx(i, j);
            let (x, y) = (i as f64 * h, j as f64 * h);
            b_d[k] = match (cfg.source, interior(i, j)) {
                (Source::Constant(f), true) => h2 * f,
                (Source::Constant(_), false) if i == 0 => cfg.inflow * 4.0 * y * (1.0 - y),
                (Source::Constant(_), false) => 0.0,
                (Source::Manufactured, true) => {
                    h2 * manufactured_source(cfg, &r.point(), x, y, in_solid(i, j))
                }
                (Source::Manufactured, false) => exact(x, y),
            };
        }
    }

    Ok(ParametricSystem {
        a0,
        a1,
        a2,
        a3,
        mass_fluid: SparseMatrix::from_diagonal(&mass_f),
        mass_solid: SparseMatrix::from_diagonal(&mass_s),
        b_d,
        g_mu,
        g_lambda,
        g_rho,
        reference: r,
        rho_s: cfg.rho_s,
    })
}

/// The continuous operator applied to `u = eˣ·sin(πy)`.
fn manufactured_source(
    cfg: &ConvectionDiffusionConfig,
    p: &ParameterPoint,
    x: f64,
    y: f64,
    solid: bool,
) -> f64 {
    let pi = std::f64::consts::PI;
    let (e, s, c) = (x.exp(), (pi * y).sin(), (pi * y).cos());
    let u = e * s;
    let ux = e * s;
    let uy = pi * e * c;
    let lap = e * s * (1.0 - pi * pi);
    let w = if solid { 1.0 } else { 0.0 };
    -p.nu * p.rho * lap
        + p.rho * cfg.kappa_rho * u * ux
        + p.mu * (cfg.reaction * u + cfg.kappa_mu * (ux * ux + uy * uy))
        + p.lambda * (cfg.solid_reaction * w * u + cfg.kappa_lambda * ux * uy)
}

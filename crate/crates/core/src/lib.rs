//! Clustered low-rank Newton method for parameter-dependent nonlinear systems.
//!
//! A nonlinear system `g(x; μ, ν[, λ, ρ]) = b_D` is posed on a grid of parameter
//! combinations. The grid is split into contiguous clusters; on each cluster one
//! anchor problem (the upper-median parameter) is solved by Newton iteration and
//! a single Newton step for every cluster member is then written as a generalized
//! Sylvester equation
//!
//! ```text
//!     Σ_i A_i · S · D_i = B        (A_i sparse M×M, D_i diagonal, rank(B) ≤ 3 or ≤ 5)
//! ```
//!
//! whose solution is approximated in factored low-rank form by truncated GMRES
//! ([`solvers::gmrest`]) or truncated Chebyshev semi-iteration
//! ([`solvers::chebyshevt`]).
//!
//! Module map:
//! - [`linalg`]: dense/sparse primitives, sparse LU, SVD, `vec`/`diago` operators.
//! - [`lowrank`]: factored matrices `U·Vᵀ` and the truncation operator.
//! - [`clustering`]: parameter grids, little-endian ordering, clusters, diagonals.
//! - [`model`]: the parametric system interface and two concrete instances.
//! - [`newton`]: single-problem Newton, the cluster matrix equation, the driver.
//! - [`solvers`]: low-rank Krylov solvers, preconditioner, Chebyshev estimation.
//! - [`timestepping`]: θ-scheme for the time-dependent problem.
//! - [`fixedpoint`]: Picard/Oseen variant of the cluster step.

pub mod clustering;
pub mod error;
pub mod fixedpoint;
pub mod linalg;
pub mod lowrank;
pub mod model;
pub mod newton;
pub mod solvers;
pub mod timestepping;

pub use error::{Error, Result};

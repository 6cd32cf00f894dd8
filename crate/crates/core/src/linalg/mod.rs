//! Dense and sparse matrix primitives.
//!
//! Dense matrices are [`nalgebra::DMatrix<f64>`], stored column-major. The
//! vectorization operator [`vec`] stacks columns, which is exactly the memory
//! layout of a column-major matrix, so `vec(X)` is a copy of the storage and the
//! block-diagonal identity `diago(A_1, …, A_m)·vec(X) = vec([A_1 x_1 | … | A_m x_m])`
//! holds without any index shuffling.
//!
//! Sparse matrices use compressed sparse column storage ([`SparseMatrix`]).

mod dense;
mod lu;
mod market;
mod sparse;

pub use dense::{diag_extract, norm2, thin_svd, unvec, vec, ThinSvd};
pub use lu::{LuFactorization, PIVOT_THRESHOLD};
pub use market::{read_matrix_market, write_matrix_market};
pub use sparse::{diago_block, SparseMatrix};

/// Column-major dense matrix.
pub type DenseMatrix = nalgebra::DMatrix<f64>;

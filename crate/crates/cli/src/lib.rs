//! Batch driver for the clustered low-rank Newton solver.

pub mod commands;
pub mod config;
pub mod error;

pub use config::RunConfig;
pub use error::CliError;

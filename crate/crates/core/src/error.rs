use std::io;

/// Errors produced by the solver library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// A pivot fell below the singularity threshold during LU factorization.
    #[error("matrix is singular: pivot stage {stage} has magnitude {pivot:e} below threshold {threshold:e}")]
    Singular {
        stage: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("Newton iteration did not converge after {steps} steps (last residual {residual:e})")]
    NewtonNotConverged { steps: usize, residual: f64 },

    #[error("anchor solve for cluster {cluster} failed: {source}")]
    AnchorFailed {
        cluster: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("time step {step} failed: {source}")]
    TimeStepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("spectrum estimation failed: {0}")]
    Estimation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}

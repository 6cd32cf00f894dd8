//! Errors of the driver and their exit codes.

use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}", ConfigMessage(line, message))]
    Config { line: Option<usize>, message: String },
    #[error(transparent)]
    Core(#[from] lrnewton::Error),
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
}

struct ConfigMessage<'a>(&'a Option<usize>, &'a String);

impl fmt::Display for ConfigMessage<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(line) => write!(f, "config error on line {line}: {}", self.1),
            None => write!(f, "config error: {}", self.1),
        }
    }
}

impl CliError {
    /// 2 for configuration problems, 3 for numerical failures, 1 for output I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Core(lrnewton::Error::InvalidConfig(_) | lrnewton::Error::Parse { .. }) => 2,
            CliError::Core(_) => 3,
            CliError::Output(_) => 1,
        }
    }
}

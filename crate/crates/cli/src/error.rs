use std::fmt;
use std::process::ExitCode;

use symopt_core::Error;

/// Failure of a command, carrying its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or input data (exit 2).
    Invalid(String),
    /// Constraint set leaves no admissible token at some step (exit 3).
    Unsatisfiable(String),
    /// Anything else (exit 1).
    Failed(anyhow::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Invalid(_) => ExitCode::from(2),
            CliError::Unsatisfiable(_) => ExitCode::from(3),
            CliError::Failed(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "{m}"),
            CliError::Unsatisfiable(m) => write!(f, "unsatisfiable constraints: {m}"),
            CliError::Failed(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Library(_) | Error::UnknownSymbol(_) | Error::Dataset(_) => {
                CliError::Invalid(e.to_string())
            }
            Error::Unsatisfiable { .. } => CliError::Unsatisfiable(e.to_string()),
            other => CliError::Failed(other.into()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Failed(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Failed(e.into())
    }
}

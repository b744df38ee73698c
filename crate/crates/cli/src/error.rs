//! Error type of the driver with its process exit-code mapping.

use polaron_core::CoreError;
use std::fmt;

/// Exit codes: 0 success, 1 failed property check, 2 configuration error,
/// 3 resource budget or I/O failure, 4 non-convergence.
#[derive(Debug)]
pub enum CliError {
    /// Bad config file, flag, or parameter value; the message names the key.
    Config(String),
    /// I/O failure, annotated with the path involved.
    Io(String, std::io::Error),
    /// A solver or quadrature did not reach its tolerance.
    NonConvergence(String),
    /// One or more properties of the `check` suite failed.
    CheckFailed(usize),
    Core(CoreError),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Io(path, e) => write!(f, "io error at {path}: {e}"),
            CliError::NonConvergence(msg) => write!(f, "did not converge: {msg}"),
            CliError::CheckFailed(n) => write!(f, "{n} property check(s) failed"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(..) => 3,
            CliError::NonConvergence(_) => 4,
            CliError::CheckFailed(_) => 1,
            CliError::Core(e) => match e {
                CoreError::InvalidParams(_)
                | CoreError::DimensionMismatch(_)
                | CoreError::EmptyInput(_) => 2,
                CoreError::ResourceBudget { .. } => 3,
                CoreError::NonConvergence { .. } | CoreError::DegenerateFit(_) => 4,
                CoreError::Io(_) => 3,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

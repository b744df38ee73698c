use thiserror::Error;

/// Errors surfaced by grid construction, basis enumeration, solvers and
/// quadrature. Variants carry enough context to be reported verbatim.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("{what} requires {needed} but the budget is {budget}")]
    ResourceBudget {
        what: String,
        needed: u64,
        budget: u64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{what} did not converge: {detail}")]
    NonConvergence { what: String, detail: String },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;

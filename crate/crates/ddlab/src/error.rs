//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by oracle construction and evaluation.
#[derive(Debug, Error)]
pub enum OracleError {
    /// The oracle command could not be spawned at all. This aborts a run,
    /// unlike a timeout which is a plain failing verdict.
    #[error("oracle command unavailable: {0}")]
    Unavailable(String),

    #[error("invalid oracle configuration: {0}")]
    InvalidConfig(String),

    #[error("oracle I/O failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Errors raised by the reduction drivers.
#[derive(Debug, Error)]
pub enum ReduceError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The property did not hold where a driver requires it to
    /// (e.g. on the initial input, or re-verifying the final result).
    #[error("property precondition violated: {0}")]
    PreconditionFailed(String),

    #[error("query budget of {budget} exhausted after {queries} queries")]
    QueryBudgetExceeded { budget: u64, queries: u64 },

    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Errors from the theory/statistics helpers.
#[derive(Debug, Error)]
pub enum MathError {
    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

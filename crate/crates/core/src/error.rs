use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The curve or grid is invalid (origin outside, nonpositive Jacobian, ...).
    #[error("geometry error: {0}")]
    Geometry(String),
    /// A linear solve failed.
    #[error("solver error at step {step}: {reason}")]
    Solver { step: usize, reason: String },
    /// An operation was called outside of its documented precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// Optimisation parameters are infeasible.
    #[error("infeasible parameters: {}", .0.join("; "))]
    Constraint(Vec<String>),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-contract input (shape mismatch, non-finite
    /// entries, out-of-range indices, bad file contents).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    /// An internal consistency identity failed beyond tolerance; usually a
    /// sign that `tol_rank` is too loose or too tight for the data.
    #[error("internal check failed: {0}")]
    InternalCheckFailed(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

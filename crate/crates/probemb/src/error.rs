//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by embedding construction, losses, training, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Two inputs disagree on a dimension (embedding width, sample count,
    /// vector length).
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A computation produced a non-finite or otherwise unusable value.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Training hit a non-finite loss and stopped.
    #[error("training aborted at step {step}: non-finite {component}")]
    TrainAbort { step: u64, component: String },

    /// A JSON-lines record failed schema validation.
    #[error("{path}:{line}: {message}")]
    Schema {
        path: String,
        line: usize,
        message: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures that indicate a numeric breakdown rather than bad
    /// input (the CLI maps these to a distinct exit code).
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_) | Error::TrainAbort { .. })
    }
}

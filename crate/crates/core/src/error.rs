use thiserror::Error;

/// Errors raised by graph construction, inference and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, indices or factor arities that do not fit together.
    #[error("structural error: {0}")]
    Structural(String),

    /// A computation would enumerate more joint states than allowed.
    #[error("capacity exceeded: {what} needs {required} joint states (budget {budget})")]
    Capacity {
        what: String,
        required: u128,
        budget: u128,
    },

    /// A scalar parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Malformed binary or text input.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// A candidate solution violates a named constraint.
    #[error("validation failed on {constraint}: {message}")]
    Validation { constraint: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

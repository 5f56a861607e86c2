//! Shared error type for the whole crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("unsupported operation: {0}")]
    Capability(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("training aborted: non-finite value at epoch {epoch}, batch {batch}")]
    Abort { epoch: usize, batch: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}

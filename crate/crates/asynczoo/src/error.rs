//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad parameters or inconsistent configuration.
    #[error("validation error: {0}")]
    Validation(String),

    /// A component or coordinate index outside the valid range.
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    /// The problem does not expose the requested oracle (e.g. gradients on a
    /// black-box objective).
    #[error("unsupported oracle: {0}")]
    UnsupportedOracle(String),

    /// A prerequisite of the convergence theory does not hold for the
    /// requested run (stability check failed, staleness above the ceiling).
    #[error("theory prerequisite violated: {0}")]
    Prerequisite(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

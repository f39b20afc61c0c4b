//! Simulator error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("malformed record at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] lane_model::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid feature: {0}")]
    InvalidFeature(String),

    #[error("invalid mass function: {0}")]
    InvalidMass(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// The KKT system stayed singular even at the maximum damping level.
    #[error("fit failed: KKT system singular at maximum damping {max_damping}")]
    FitSingular { max_damping: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

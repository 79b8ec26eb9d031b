use thiserror::Error;

/// Errors raised by the closed-form geometry and reward math.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("coordinate out of range: lat={latitude}, lon={longitude}")]
    CoordinateOutOfRange { latitude: f64, longitude: f64 },
    #[error("beta must be finite and greater than 1, got {0}")]
    InvalidBeta(f64),
    #[error("reward group is empty")]
    EmptyGroup,
    #[error("reward at index {0} is not finite")]
    NonFiniteReward(usize),
    #[error("clip epsilon must be finite and positive, got {0}")]
    InvalidClipEpsilon(f64),
    #[error("surrogate inputs must be finite")]
    NonFiniteInput,
    #[error("probability ratio is not finite")]
    NonFiniteRatio,
    #[error("invalid label: {0}")]
    InvalidLabel(String),
}

//! Per-sample clipped surrogate objective term.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;
use crate::GeoError;

pub const DEFAULT_CLIP_EPSILON: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateTermInput<T: Real = f64> {
    /// Log-probability of the output under the current policy.
    pub logprob_new: T,
    /// Log-probability under the policy that sampled the output.
    pub logprob_old: T,
    pub advantage: T,
    pub clip_epsilon: T,
}

/// `min(ratio·A, clip(ratio, 1-ε, 1+ε)·A)` with `ratio = exp(logprob_new - logprob_old)`.
pub fn clipped_surrogate_term<T: Real>(input: &SurrogateTermInput<T>) -> Result<T, GeoError> {
    if !input.logprob_new.is_finite() || !input.logprob_old.is_finite() {
        return Err(GeoError::NonFiniteInput);
    }
    let ratio = (input.logprob_new - input.logprob_old).exp();
    surrogate_from_ratio(ratio, input.advantage, input.clip_epsilon)
}

/// The same term evaluated from an explicit probability ratio.
pub fn surrogate_from_ratio<T: Real>(ratio: T, advantage: T, clip_epsilon: T) -> Result<T, GeoError> {
    if !clip_epsilon.is_finite() || clip_epsilon <= T::zero() {
        return Err(GeoError::InvalidClipEpsilon(clip_epsilon.to_f64().unwrap_or(f64::NAN)));
    }
    if !advantage.is_finite() {
        return Err(GeoError::NonFiniteInput);
    }
    if !ratio.is_finite() {
        return Err(GeoError::NonFiniteRatio);
    }
    let clipped = ratio.max(T::one() - clip_epsilon).min(T::one() + clip_epsilon);
    Ok((ratio * advantage).min(clipped * advantage))
}

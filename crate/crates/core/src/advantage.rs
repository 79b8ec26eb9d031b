//! Group-relative advantage normalization.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;
use crate::GeoError;

/// Normalizes each reward against its group: `(r - mean) / std` with the
/// population standard deviation. A group whose rewards are all equal gets
/// all-zero advantages.
pub fn group_advantages<T: Real>(rewards: &[T]) -> Result<Vec<T>, GeoError> {
    if rewards.is_empty() {
        return Err(GeoError::EmptyGroup);
    }
    if let Some(i) = rewards.iter().position(|r| !r.is_finite()) {
        return Err(GeoError::NonFiniteReward(i));
    }
    let first = rewards[0];
    if rewards.iter().all(|&r| r == first) {
        return Ok(vec![T::zero(); rewards.len()]);
    }
    let n = T::from_usize(rewards.len()).expect("group size fits scalar");
    let mean = rewards.iter().fold(T::zero(), |acc, &r| acc + r) / n;
    let var = rewards.iter().fold(T::zero(), |acc, &r| acc + (r - mean).powi(2)) / n;
    let std = var.sqrt();
    if std == T::zero() {
        return Ok(vec![T::zero(); rewards.len()]);
    }
    Ok(rewards.iter().map(|&r| (r - mean) / std).collect())
}

/// Rewards sampled for one question and their normalized advantages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct RewardGroup<T: Real = f64> {
    question_id: String,
    rewards: Vec<T>,
    advantages: Vec<T>,
}

impl<T: Real> RewardGroup<T> {
    pub fn from_rewards(question_id: impl Into<String>, rewards: Vec<T>) -> Result<Self, GeoError> {
        let advantages = group_advantages(&rewards)?;
        Ok(Self { question_id: question_id.into(), rewards, advantages })
    }

    pub fn question_id(&self) -> &str {
        &self.question_id
    }

    pub fn rewards(&self) -> &[T] {
        &self.rewards
    }

    pub fn advantages(&self) -> &[T] {
        &self.advantages
    }

    pub fn group_size(&self) -> usize {
        self.rewards.len()
    }

    pub fn mean_reward(&self) -> T {
        let n = T::from_usize(self.rewards.len()).expect("group size fits scalar");
        self.rewards.iter().fold(T::zero(), |acc, &r| acc + r) / n
    }
}

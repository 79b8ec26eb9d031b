//! Hierarchical reward over administrative levels.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;
use crate::verdict::LevelVerdicts;
use crate::GeoError;

pub const DEFAULT_BETA: f64 = 2.0;

/// The level at which a prediction earned its reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardRung {
    None,
    Country,
    Province,
    City,
}

impl RewardRung {
    pub const ALL: [RewardRung; 4] =
        [RewardRung::City, RewardRung::Province, RewardRung::Country, RewardRung::None];

    /// Finest correct level, checked city first.
    pub fn of(verdicts: &LevelVerdicts) -> Self {
        if verdicts.city {
            RewardRung::City
        } else if verdicts.province {
            RewardRung::Province
        } else if verdicts.country {
            RewardRung::Country
        } else {
            RewardRung::None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RewardRung::None => "none",
            RewardRung::Country => "country",
            RewardRung::Province => "province",
            RewardRung::City => "city",
        }
    }
}

/// Reward value `β²`, `β`, `1` or `0` together with the rung that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalReward<T: Real = f64> {
    beta: T,
    value: T,
    rung: RewardRung,
}

impl<T: Real> HierarchicalReward<T> {
    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn value(&self) -> T {
        self.value
    }

    pub fn rung(&self) -> RewardRung {
        self.rung
    }
}

/// Value of a single rung for a given `beta`.
pub fn rung_value<T: Real>(rung: RewardRung, beta: T) -> T {
    match rung {
        RewardRung::City => beta * beta,
        RewardRung::Province => beta,
        RewardRung::Country => T::one(),
        RewardRung::None => T::zero(),
    }
}

/// Scores verdicts finest-first: `β²` for a correct city, else `β` for a
/// correct province, else `1` for a correct country, else `0`.
pub fn hierarchical_reward<T: Real>(
    verdicts: &LevelVerdicts,
    beta: T,
) -> Result<HierarchicalReward<T>, GeoError> {
    if !beta.is_finite() || beta <= T::one() {
        return Err(GeoError::InvalidBeta(beta.to_f64().unwrap_or(f64::NAN)));
    }
    let rung = RewardRung::of(verdicts);
    Ok(HierarchicalReward { beta, value: rung_value(rung, beta), rung })
}

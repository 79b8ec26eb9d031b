//! Per-level correctness verdicts.

use serde::{Deserialize, Serialize};

use crate::label::Level;

/// How a level verdict was decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictMethod {
    #[default]
    Rule,
    Model,
    ForcedByContainment,
}

/// Correctness at country, province/state and city level.
///
/// Values built through [`LevelVerdicts::closed`] satisfy
/// `city ⇒ province ⇒ country`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LevelVerdicts {
    pub country: bool,
    pub province: bool,
    pub city: bool,
    #[serde(default)]
    pub methods: LevelMethods,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LevelMethods {
    pub country: VerdictMethod,
    pub province: VerdictMethod,
    pub city: VerdictMethod,
}

impl LevelVerdicts {
    /// Raw verdicts without containment applied, all decided by rule.
    pub fn raw(country: bool, province: bool, city: bool) -> Self {
        Self { country, province, city, methods: LevelMethods::default() }
    }

    /// All levels incorrect.
    pub fn none() -> Self {
        Self::raw(false, false, false)
    }

    pub fn get(&self, level: Level) -> bool {
        match level {
            Level::Country => self.country,
            Level::Province => self.province,
            Level::City => self.city,
        }
    }

    pub fn set(&mut self, level: Level, correct: bool, method: VerdictMethod) {
        match level {
            Level::Country => {
                self.country = correct;
                self.methods.country = method;
            }
            Level::Province => {
                self.province = correct;
                self.methods.province = method;
            }
            Level::City => {
                self.city = correct;
                self.methods.city = method;
            }
        }
    }

    pub fn method(&self, level: Level) -> VerdictMethod {
        match level {
            Level::Country => self.methods.country,
            Level::Province => self.methods.province,
            Level::City => self.methods.city,
        }
    }

    /// Applies hierarchical containment: a correct finer level forces every
    /// coarser level to correct.
    pub fn closed(mut self) -> Self {
        if self.city && !self.province {
            self.set(Level::Province, true, VerdictMethod::ForcedByContainment);
        }
        if self.province && !self.country {
            self.set(Level::Country, true, VerdictMethod::ForcedByContainment);
        }
        self
    }

    pub fn is_closed(&self) -> bool {
        (!self.city || self.province) && (!self.province || self.country)
    }
}

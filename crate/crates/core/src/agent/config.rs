use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tools::{ZoomConfig, DEFAULT_PIXEL_BUDGET, DEFAULT_SEARCH_LIMIT, DEFAULT_ZOOM_TARGET};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid loop configuration: {0}")]
pub struct ConfigError(pub String);

/// Which tools the policy may call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToolSet {
    pub image_zoom_in_tool: bool,
    pub search_web: bool,
}

impl Default for ToolSet {
    fn default() -> Self {
        Self { image_zoom_in_tool: true, search_web: true }
    }
}

/// Limits and knobs of a single rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopConfig {
    pub max_turns: usize,
    pub max_context_tokens: u64,
    pub pixel_budget: u64,
    /// After a cap, ask once more for an answer with tools disabled.
    pub force_final_answer: bool,
    pub tool_set: ToolSet,
    /// Context cost charged per image part.
    pub image_token_cost: u64,
    pub zoom_target_long_side: u32,
    pub search_limit: usize,
    /// Retries after a transport error from the policy endpoint.
    pub policy_retries: u32,
    pub retry_backoff_ms: u64,
    /// Disables retries and backoff so runs are reproducible.
    pub deterministic: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            max_turns: 6,
            max_context_tokens: 32_768,
            pixel_budget: DEFAULT_PIXEL_BUDGET,
            force_final_answer: true,
            tool_set: ToolSet::default(),
            image_token_cost: 2_560,
            zoom_target_long_side: DEFAULT_ZOOM_TARGET,
            search_limit: DEFAULT_SEARCH_LIMIT,
            policy_retries: 3,
            retry_backoff_ms: 500,
            deterministic: false,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_turns < 1 {
            return Err(ConfigError("max_turns must be at least 1".into()));
        }
        if self.max_context_tokens < 1024 {
            return Err(ConfigError("max_context_tokens must be at least 1024".into()));
        }
        if self.pixel_budget < 1 {
            return Err(ConfigError("pixel_budget must be at least 1".into()));
        }
        if self.zoom_target_long_side < 1 {
            return Err(ConfigError("zoom_target_long_side must be at least 1".into()));
        }
        if self.search_limit < 1 {
            return Err(ConfigError("search_limit must be at least 1".into()));
        }
        Ok(())
    }

    pub fn zoom(&self) -> ZoomConfig {
        ZoomConfig { target_long_side: self.zoom_target_long_side, pixel_budget: self.pixel_budget }
    }

    pub(crate) fn retries(&self) -> u32 {
        if self.deterministic {
            0
        } else {
            self.policy_retries
        }
    }

    pub(crate) fn backoff(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.retry_backoff_ms.saturating_mul(1u64 << attempt.min(16)))
    }
}

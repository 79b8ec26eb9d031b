//! The thought/action/observation loop: drives a policy turn by turn, runs
//! the requested tools, feeds observations back and enforces the turn and
//! context caps. [`run_batch`] fans samples out over a worker pool.

mod batch;
mod config;
mod context;
mod rollout;

pub use batch::{run_batch, BatchReport};
pub use config::{ConfigError, LoopConfig, ToolSet};
pub use context::{estimate_context_tokens, system_prompt_tokens, text_tokens};
pub use rollout::{run_trajectory, RolloutSample, SampleImage, Toolbox, DEFAULT_QUESTION};

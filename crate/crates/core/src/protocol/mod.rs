//! Model-facing protocol: the system prompt, `<think>` / `<tool_call>` /
//! `<answer>` turns, and trajectory records.

mod invocation;
mod parse;
mod prompt;
mod trajectory;

pub use invocation::{BoundingBox, ToolInvocation, ToolName};
pub use parse::{parse_model_output, Malformed, MalformedReason, Payload, ProtocolMessage, ProtocolWarning};
pub use prompt::render_system_prompt;
pub use trajectory::{
    deserialize_trajectory, header_line, read_jsonl, serialize_trajectory, Action, ImageObservation,
    LogHeader, Observation, Termination, ToolCallStats, ToolCounts, Trajectory, TrajectoryError, Turn,
};

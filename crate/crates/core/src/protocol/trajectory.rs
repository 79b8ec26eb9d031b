use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Malformed, ProtocolWarning, ToolInvocation, ToolName};

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("invalid trajectory `{sample_id}`: {reason}")]
    Invalid { sample_id: String, reason: String },
    #[error("line {line}: {source}")]
    Decode { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Encode(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Why a rollout stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Answered,
    TurnCap,
    ContextCap,
    ProtocolError,
}

impl Termination {
    pub const ALL: [Termination; 4] = [
        Termination::Answered,
        Termination::TurnCap,
        Termination::ContextCap,
        Termination::ProtocolError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Answered => "answered",
            Termination::TurnCap => "turn_cap",
            Termination::ContextCap => "context_cap",
            Termination::ProtocolError => "protocol_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    ToolCall { call: ToolInvocation },
    Answer { text: String },
    Malformed(Malformed),
}

impl Action {
    pub fn tool_call(&self) -> Option<&ToolInvocation> {
        match self {
            Action::ToolCall { call } => Some(call),
            _ => None,
        }
    }
}

/// Image produced by a tool, stored on disk under a content-addressed name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageObservation {
    /// Path relative to the trajectory log directory.
    pub path: String,
    pub sha256: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observation {
    Image(ImageObservation),
    Text { text: String },
    /// Error text shown to the model after a failed or malformed call.
    Error { message: String },
}

impl Observation {
    pub fn is_error(&self) -> bool {
        matches!(self, Observation::Error { .. })
    }
}

/// One thought/action/observation step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thought: Option<String>,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<Observation>,
    /// Tools-disabled turn appended after a cap was hit.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub forced: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<ProtocolWarning>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCounts {
    pub total: u32,
    pub failed: u32,
}

impl ToolCounts {
    pub fn record(&mut self, failed: bool) {
        self.total += 1;
        if failed {
            self.failed += 1;
        }
    }

    pub fn merge(&mut self, other: ToolCounts) {
        self.total += other.total;
        self.failed += other.failed;
    }
}

/// Call counts per tool. Tool calls naming an unknown tool go to `unknown`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCallStats {
    pub image_zoom_in_tool: ToolCounts,
    pub search_web: ToolCounts,
    pub unknown: ToolCounts,
}

impl ToolCallStats {
    pub fn counts_mut(&mut self, tool: Option<ToolName>) -> &mut ToolCounts {
        match tool {
            Some(ToolName::ImageZoomInTool) => &mut self.image_zoom_in_tool,
            Some(ToolName::SearchWeb) => &mut self.search_web,
            None => &mut self.unknown,
        }
    }

    pub fn buckets(&self) -> [(&'static str, ToolCounts); 3] {
        [
            ("image_zoom_in_tool", self.image_zoom_in_tool),
            ("search_web", self.search_web),
            ("unknown", self.unknown),
        ]
    }

    pub fn totals(&self) -> ToolCounts {
        let mut all = ToolCounts::default();
        for (_, c) in self.buckets() {
            all.merge(c);
        }
        all
    }

    pub fn merge(&mut self, other: &ToolCallStats) {
        self.image_zoom_in_tool.merge(other.image_zoom_in_tool);
        self.search_web.merge(other.search_web);
        self.unknown.merge(other.unknown);
    }

    /// Failed calls over total calls; zero when no call was made.
    pub fn failure_rate(&self) -> f64 {
        let t = self.totals();
        if t.total == 0 {
            0.0
        } else {
            f64::from(t.failed) / f64::from(t.total)
        }
    }
}

/// A full rollout for one sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub sample_id: String,
    pub turns: Vec<Turn>,
    pub termination: Termination,
    #[serde(default)]
    pub final_answer: Option<String>,
    pub tool_call_stats: ToolCallStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Trajectory {
    pub fn new(sample_id: impl Into<String>) -> Self {
        Self {
            sample_id: sample_id.into(),
            turns: Vec::new(),
            termination: Termination::ProtocolError,
            final_answer: None,
            tool_call_stats: ToolCallStats::default(),
            error: None,
        }
    }

    /// Turns that executed a tool or reported a protocol error, i.e. all
    /// non-forced turns that did not answer.
    pub fn tool_turns(&self) -> usize {
        self.turns
            .iter()
            .filter(|t| !t.forced && !matches!(t.action, Action::Answer { .. }))
            .count()
    }

    /// Checks structural invariants. `max_turns` bounds the number of regular
    /// turns; one trailing forced turn is allowed on top.
    pub fn validate(&self, max_turns: Option<usize>) -> Result<(), TrajectoryError> {
        let fail = |reason: String| {
            Err(TrajectoryError::Invalid { sample_id: self.sample_id.clone(), reason })
        };
        if (self.termination == Termination::Answered) != self.final_answer.is_some() {
            return fail("termination `answered` must coincide with a final answer".into());
        }
        for (name, c) in self.tool_call_stats.buckets() {
            if c.failed > c.total {
                return fail(format!("{name}: failed calls exceed total calls"));
            }
        }
        let forced = self.turns.iter().filter(|t| t.forced).count();
        if forced > 1 || (forced == 1 && !self.turns.last().is_some_and(|t| t.forced)) {
            return fail("a forced turn may only appear once, as the last turn".into());
        }
        if let Some(max) = max_turns {
            if self.turns.len() - forced > max {
                return fail(format!("{} turns exceed the cap of {max}", self.turns.len() - forced));
            }
        }
        for (i, turn) in self.turns.iter().enumerate() {
            let answered = matches!(turn.action, Action::Answer { .. });
            if answered && i + 1 != self.turns.len() {
                return fail(format!("turn {i}: answer before the last turn"));
            }
            if answered && turn.observation.is_some() {
                return fail(format!("turn {i}: an answer has no observation"));
            }
            if turn.forced && turn.observation.is_some() {
                return fail(format!("turn {i}: forced turns do not execute tools"));
            }
        }
        Ok(())
    }
}

/// Encodes a trajectory as one JSON line (without the trailing newline).
pub fn serialize_trajectory(t: &Trajectory) -> Result<String, TrajectoryError> {
    Ok(serde_json::to_string(t)?)
}

pub fn deserialize_trajectory(line: &str) -> Result<Trajectory, TrajectoryError> {
    serde_json::from_str(line).map_err(|source| TrajectoryError::Decode { line: 1, source })
}

/// Provenance line written at the top of every log file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub kind: String,
    pub seed: u64,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: LogHeader,
}

pub fn header_line(header: &LogHeader) -> Result<String, TrajectoryError> {
    Ok(serde_json::to_string(&HeaderLine { header: header.clone() })?)
}

/// Splits a line-delimited file into its optional header and records.
/// Blank lines are skipped.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(
    reader: impl BufRead,
) -> Result<(Option<LogHeader>, Vec<T>), TrajectoryError> {
    let mut header = None;
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 && line.starts_with("{\"header\":") {
            let h: HeaderLine = serde_json::from_str(&line)
                .map_err(|source| TrajectoryError::Decode { line: 1, source })?;
            header = Some(h.header);
            continue;
        }
        records.push(
            serde_json::from_str(&line).map_err(|source| TrajectoryError::Decode { line: i + 1, source })?,
        );
    }
    Ok((header, records))
}

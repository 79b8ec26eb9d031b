use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::error::Category;

use super::{ToolInvocation, ToolName};

/// Machine-readable reason a model turn could not be used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MalformedReason {
    UnclosedTag,
    IncompleteJson,
    InvalidJson,
    UnknownTool,
    BadArguments,
    MissingPayload,
    EmptyAnswer,
}

impl MalformedReason {
    pub fn code(self) -> &'static str {
        match self {
            MalformedReason::UnclosedTag => "unclosed_tag",
            MalformedReason::IncompleteJson => "incomplete_json",
            MalformedReason::InvalidJson => "invalid_json",
            MalformedReason::UnknownTool => "unknown_tool",
            MalformedReason::BadArguments => "bad_arguments",
            MalformedReason::MissingPayload => "missing_payload",
            MalformedReason::EmptyAnswer => "empty_answer",
        }
    }

    /// Whether the turn attempted a tool call (and so counts as a failed call).
    pub fn is_tool_attempt(self) -> bool {
        matches!(
            self,
            MalformedReason::IncompleteJson
                | MalformedReason::InvalidJson
                | MalformedReason::UnknownTool
                | MalformedReason::BadArguments
        )
    }
}

impl fmt::Display for MalformedReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MalformedReason::UnclosedTag => "unclosed tag",
            MalformedReason::IncompleteJson => "incomplete json tool-call",
            MalformedReason::InvalidJson => "invalid json tool-call",
            MalformedReason::UnknownTool => "unknown tool name",
            MalformedReason::BadArguments => "wrong tool arguments",
            MalformedReason::MissingPayload => "no tool call or answer",
            MalformedReason::EmptyAnswer => "empty answer",
        })
    }
}

/// An unusable model turn, with the raw text kept for logging.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Malformed {
    pub reason: MalformedReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<ToolName>,
    pub detail: String,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProtocolWarning {
    /// More than one `<tool_call>` block; only the first is used.
    ExtraToolCalls { ignored: usize },
    /// Both an answer and tool calls were present; the answer wins.
    ToolCallIgnoredForAnswer,
    ExtraAnswers { ignored: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Tool(ToolInvocation),
    Answer(String),
    Malformed(Malformed),
}

/// One parsed assistant turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolMessage {
    pub think: Option<String>,
    pub payload: Payload,
    pub warnings: Vec<ProtocolWarning>,
}

const THINK: (&str, &str) = ("<think>", "</think>");
const TOOL_CALL: (&str, &str) = ("<tool_call>", "</tool_call>");
const ANSWER: (&str, &str) = ("<answer>", "</answer>");

struct Block<'a> {
    inner: &'a str,
    closed: bool,
    start: usize,
    end: usize,
}

/// Scans non-overlapping `open ... close` blocks. An open tag without a
/// matching close yields a final unclosed block running to the end of text.
fn blocks<'a>(text: &'a str, (open, close): (&str, &str)) -> Vec<Block<'a>> {
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(rel) = text[pos..].find(open) {
        let start = pos + rel;
        let body = start + open.len();
        match text[body..].find(close) {
            Some(c) => {
                let end = body + c + close.len();
                out.push(Block { inner: &text[body..body + c], closed: true, start, end });
                pos = end;
            }
            None => {
                out.push(Block { inner: &text[body..], closed: false, start, end: text.len() });
                break;
            }
        }
    }
    out
}

/// Parses a complete assistant turn. Never fails: unusable turns come back as
/// [`Payload::Malformed`].
pub fn parse_model_output(raw: &str) -> ProtocolMessage {
    let malformed = |think: Option<String>, reason, tool, detail: String| ProtocolMessage {
        think,
        payload: Payload::Malformed(Malformed { reason, tool, detail, raw: raw.to_string() }),
        warnings: Vec::new(),
    };

    let thinks = blocks(raw, THINK);
    let think = thinks.first().map(|b| b.inner.to_string());
    if thinks.iter().any(|b| !b.closed) {
        return malformed(think, MalformedReason::UnclosedTag, None, "unclosed <think>".into());
    }
    // Payload tags are only honoured outside think blocks.
    let mut rest = String::with_capacity(raw.len());
    let mut pos = 0;
    for b in &thinks {
        rest.push_str(&raw[pos..b.start]);
        pos = b.end;
    }
    rest.push_str(&raw[pos..]);

    let answers = blocks(&rest, ANSWER);
    let calls = blocks(&rest, TOOL_CALL);
    let mut warnings = Vec::new();

    let closed_answers: Vec<&Block> = answers.iter().filter(|b| b.closed).collect();
    if let Some(first) = closed_answers.first() {
        if closed_answers.len() > 1 {
            warnings.push(ProtocolWarning::ExtraAnswers { ignored: closed_answers.len() - 1 });
        }
        if !calls.is_empty() {
            warnings.push(ProtocolWarning::ToolCallIgnoredForAnswer);
        }
        let text = first.inner.trim();
        if text.is_empty() {
            return malformed(think, MalformedReason::EmptyAnswer, None, "empty <answer>".into());
        }
        return ProtocolMessage { think, payload: Payload::Answer(text.to_string()), warnings };
    }

    let Some(call) = calls.first() else {
        if !answers.is_empty() {
            return malformed(think, MalformedReason::UnclosedTag, None, "unclosed <answer>".into());
        }
        return malformed(
            think,
            MalformedReason::MissingPayload,
            None,
            "expected <tool_call> or <answer>".into(),
        );
    };
    if calls.len() > 1 {
        warnings.push(ProtocolWarning::ExtraToolCalls { ignored: calls.len() - 1 });
    }

    let body = call.inner.trim();
    let value = match serde_json::from_str::<serde_json::Value>(body) {
        Ok(v) => v,
        Err(e) => {
            let reason = if e.classify() == Category::Eof {
                MalformedReason::IncompleteJson
            } else {
                MalformedReason::InvalidJson
            };
            return ProtocolMessage { warnings, ..malformed(think, reason, None, e.to_string()) };
        }
    };
    if !call.closed {
        return ProtocolMessage {
            warnings,
            ..malformed(think, MalformedReason::UnclosedTag, None, "unclosed <tool_call>".into())
        };
    }
    match ToolInvocation::from_value(&value) {
        Ok(inv) => ProtocolMessage { think, payload: Payload::Tool(inv), warnings },
        Err((reason, tool, detail)) => {
            ProtocolMessage { warnings, ..malformed(think, reason, tool, detail) }
        }
    }
}

use serde::{Deserialize, Serialize};

use super::CurationError;
use crate::assets::SYSTEM_PROMPT;
use crate::eval::verify_levels;
use crate::label::GeoLabel;
use crate::protocol::{parse_model_output, Action, Observation, Payload, Termination, Trajectory};
use crate::verdict::LevelVerdicts;

/// Placeholder marking where an image goes in an exported message.
const IMAGE_TOKEN: &str = "<image>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftMessage {
    pub role: String,
    pub content: String,
}

impl SftMessage {
    fn new(role: &str, content: impl Into<String>) -> Self {
        Self { role: role.to_string(), content: content.into() }
    }
}

/// One fine-tuning conversation. Each `<image>` placeholder in the messages
/// refers to the next entry of `images`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftRecord {
    pub sample_id: String,
    pub images: Vec<String>,
    pub messages: Vec<SftMessage>,
}

/// A trajectory left out of the export, and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub sample_id: String,
    pub reason: String,
}

fn assistant_text(thought: Option<&str>, body: &str) -> String {
    match thought {
        Some(t) => format!("<think>{t}</think>\n{body}"),
        None => body.to_string(),
    }
}

/// Converts an answered, well-formed trajectory into a conversation:
/// system prompt, the user turn with the image and question, alternating
/// assistant tool calls and tool responses, and the final answer.
pub fn sft_record(trajectory: &Trajectory, input_image: &str, question: &str) -> Result<SftRecord, CurationError> {
    let id = &trajectory.sample_id;
    let reject = |reason: String| CurationError::NonConformant { sample_id: id.clone(), reason };
    trajectory.validate(None).map_err(|e| reject(e.to_string()))?;
    if trajectory.termination != Termination::Answered {
        return Err(reject(format!("termination is {}", trajectory.termination.as_str())));
    }
    let system = SYSTEM_PROMPT.load().map_err(|e| reject(e.to_string()))?;
    let mut images = vec![input_image.to_string()];
    let mut messages = vec![
        SftMessage::new("system", system),
        SftMessage::new("user", format!("{IMAGE_TOKEN}\n{question}")),
    ];
    for (i, turn) in trajectory.turns.iter().enumerate() {
        if turn.forced {
            return Err(reject(format!("turn {i} is a forced answer")));
        }
        let thought = turn.thought.as_deref();
        match &turn.action {
            Action::Malformed(m) => return Err(reject(format!("turn {i} is malformed ({})", m.reason.code()))),
            Action::Answer { text } => {
                let content = assistant_text(thought, &format!("<answer>{text}</answer>"));
                match parse_model_output(&content).payload {
                    Payload::Answer(parsed) if parsed == *text => {}
                    _ => return Err(reject(format!("turn {i}: answer does not re-parse"))),
                }
                messages.push(SftMessage::new("assistant", content));
            }
            Action::ToolCall { call } => {
                let content = assistant_text(thought, &call.to_tool_call_block());
                match parse_model_output(&content).payload {
                    Payload::Tool(parsed) if parsed == *call => {}
                    _ => return Err(reject(format!("turn {i}: tool call does not re-parse"))),
                }
                messages.push(SftMessage::new("assistant", content));
                let response = match &turn.observation {
                    Some(Observation::Image(img)) => {
                        images.push(img.path.clone());
                        IMAGE_TOKEN.to_string()
                    }
                    Some(Observation::Text { text }) => text.clone(),
                    Some(Observation::Error { .. }) => return Err(reject(format!("turn {i}: tool call failed"))),
                    None => return Err(reject(format!("turn {i}: tool call without observation"))),
                };
                messages.push(SftMessage::new("user", format!("<tool_response>\n{response}\n</tool_response>")));
            }
        }
    }
    Ok(SftRecord { sample_id: id.clone(), images, messages })
}

/// Exports every conformant trajectory, in order, and lists the rest.
/// Answers are not checked for correctness.
pub fn export_sft_dataset<'a>(
    items: impl IntoIterator<Item = (&'a Trajectory, &'a str, &'a str)>,
) -> (Vec<SftRecord>, Vec<Rejection>) {
    let mut records = Vec::new();
    let mut rejected = Vec::new();
    for (traj, image, question) in items {
        match sft_record(traj, image, question) {
            Ok(r) => records.push(r),
            Err(e) => rejected.push(Rejection { sample_id: traj.sample_id.clone(), reason: e.to_string() }),
        }
    }
    (records, rejected)
}

/// A curated trajectory whose answer disagrees with the label at city level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerLint {
    pub sample_id: String,
    pub answer: String,
    pub verdicts: LevelVerdicts,
}

/// Reports (without removing) answers that miss the labelled city.
pub fn lint_answers<'a>(items: impl IntoIterator<Item = (&'a Trajectory, &'a GeoLabel)>) -> Vec<AnswerLint> {
    items
        .into_iter()
        .filter_map(|(traj, label)| {
            let answer = traj.final_answer.as_deref()?;
            let verdicts = verify_levels(&traj.sample_id, answer, label, None).verdicts;
            (!verdicts.city).then(|| AnswerLint { sample_id: traj.sample_id.clone(), answer: answer.to_string(), verdicts })
        })
        .collect()
}

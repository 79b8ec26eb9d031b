use std::sync::Arc;

use super::EvalError;
use crate::assets::VERIFIER_PROMPT;
use crate::chat::{single_turn, PolicyClient};
use crate::label::{GeoLabel, Level};
use crate::text::contains_term;
use crate::verdict::{LevelVerdicts, VerdictMethod};

/// Model-based judge for a single level: does `answer` name `expected`?
pub trait LevelVerifier: Send + Sync {
    fn verify(&self, sample_id: &str, level: Level, expected: &str, answer: &str) -> Result<bool, EvalError>;
}

/// Verifier backed by a chat model and the pinned yes/no prompt.
#[derive(Clone)]
pub struct ChatVerifier {
    client: Arc<dyn PolicyClient>,
}

impl ChatVerifier {
    pub fn new(client: Arc<dyn PolicyClient>) -> Self {
        Self { client }
    }
}

impl LevelVerifier for ChatVerifier {
    fn verify(&self, sample_id: &str, level: Level, expected: &str, answer: &str) -> Result<bool, EvalError> {
        let template = VERIFIER_PROMPT.load().map_err(|e| EvalError::Helper(e.to_string()))?;
        let prompt = template
            .replace("{level}", level.as_str())
            .replace("{expected}", expected)
            .replace("{answer}", answer);
        let reply = single_turn(self.client.as_ref(), sample_id, &prompt, None)
            .map_err(|e| EvalError::Helper(e.to_string()))?;
        parse_yes_no(&reply)
    }
}

fn parse_yes_no(reply: &str) -> Result<bool, EvalError> {
    let word: String = reply
        .trim()
        .chars()
        .take_while(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    match word.as_str() {
        "yes" => Ok(true),
        "no" => Ok(false),
        _ => Err(EvalError::Unparseable(reply.to_string())),
    }
}

/// Verdicts plus notes about verifier failures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verification {
    pub verdicts: LevelVerdicts,
    pub flags: Vec<String>,
}

/// Level-wise correctness of `answer` against `label`.
///
/// Rules run first: a level matches when its canonical name or any alias
/// occurs in the answer (case, diacritics and punctuation ignored, whole
/// tokens only). Levels without a rule match go to `verifier` when one is
/// given; if it fails, the rule result stands and a flag is added.
/// Containment closure is applied last.
pub fn verify_levels(
    sample_id: &str,
    answer: &str,
    label: &GeoLabel,
    verifier: Option<&dyn LevelVerifier>,
) -> Verification {
    let mut verdicts = LevelVerdicts::none();
    let mut flags = Vec::new();
    for level in Level::ALL {
        if label.accepted_names(level).iter().any(|name| contains_term(answer, name)) {
            verdicts.set(level, true, VerdictMethod::Rule);
            continue;
        }
        let Some(verifier) = verifier else { continue };
        match verifier.verify(sample_id, level, label.name(level), answer) {
            Ok(correct) => verdicts.set(level, correct, VerdictMethod::Model),
            Err(e) => flags.push(format!("verifier failed at {level} level: {e}")),
        }
    }
    Verification { verdicts: verdicts.closed(), flags }
}

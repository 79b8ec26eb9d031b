use std::sync::Arc;

use super::EvalError;
use crate::assets::EXTRACTOR_PROMPT;
use crate::chat::{single_turn, PolicyClient};

/// Turns a free-form answer into one geocodable address.
pub trait AddressExtractor: Send + Sync {
    /// `Ok(None)` when the answer names no location.
    fn extract(&self, sample_id: &str, answer: &str) -> Result<Option<String>, EvalError>;
}

/// Extractor backed by a chat model and the pinned extraction prompt.
#[derive(Clone)]
pub struct ChatExtractor {
    client: Arc<dyn PolicyClient>,
}

impl ChatExtractor {
    pub fn new(client: Arc<dyn PolicyClient>) -> Self {
        Self { client }
    }
}

impl AddressExtractor for ChatExtractor {
    fn extract(&self, sample_id: &str, answer: &str) -> Result<Option<String>, EvalError> {
        let template = EXTRACTOR_PROMPT.load().map_err(|e| EvalError::Helper(e.to_string()))?;
        let prompt = template.replace("{answer}", answer);
        let reply = single_turn(self.client.as_ref(), sample_id, &prompt, None)
            .map_err(|e| EvalError::Helper(e.to_string()))?;
        let cleaned = reply.trim().trim_matches(|c| c == '"' || c == '\'' || c == '`').trim();
        if cleaned.is_empty() || cleaned.eq_ignore_ascii_case("none") {
            return Ok(None);
        }
        Ok(Some(clean_tail(cleaned).to_string()))
    }
}

/// Predicted address and whether a helper failure forced the rule fallback.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub address: Option<String>,
    pub flag: Option<String>,
}

pub fn extract_predicted_address(sample_id: &str, answer: &str, extractor: Option<&dyn AddressExtractor>) -> Extraction {
    match extractor.map(|x| x.extract(sample_id, answer)) {
        Some(Ok(address)) => Extraction { address, flag: None },
        Some(Err(e)) => Extraction { address: extract_rule(answer), flag: Some(format!("extractor failed: {e}")) },
        None => Extraction { address: extract_rule(answer), flag: None },
    }
}

/// Rule-based extraction: the last line holding a comma-separated place
/// expression, with any lead-in phrase ("the answer is ...") removed. A
/// single capitalized line without commas is taken as is. Returns `None`
/// when nothing looks like a place.
pub fn extract_rule(answer: &str) -> Option<String> {
    let lines: Vec<&str> = answer.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    if let Some(line) = lines.iter().rev().find(|l| l.contains(',')) {
        let line = line.rsplit_once(':').map_or(*line, |(_, rest)| rest);
        let mut segments = line.split(',').map(str::trim);
        let head = capitalized_tail(segments.next().unwrap_or_default());
        let parts: Vec<String> = std::iter::once(head)
            .chain(segments.map(|s| capitalized_head(clean_tail(s))))
            .filter(|p| !p.is_empty())
            .collect();
        let joined = parts.join(", ");
        let joined = clean_tail(&joined);
        return joined.chars().any(char::is_alphabetic).then(|| joined.to_string());
    }
    match lines.as_slice() {
        [single] => {
            let line = clean_tail(single.rsplit_once(':').map_or(*single, |(_, rest)| rest).trim());
            (!line.is_empty() && line.split_whitespace().all(starts_capitalized)).then(|| line.to_string())
        }
        _ => None,
    }
}

fn starts_capitalized(word: &str) -> bool {
    word.chars().find(|c| c.is_alphanumeric()).is_some_and(|c| c.is_uppercase() || c.is_numeric())
}

/// Longest run of capitalized words at the end of `segment`.
fn capitalized_tail(segment: &str) -> String {
    let words: Vec<&str> = segment.split_whitespace().collect();
    let start = words.iter().rposition(|w| !starts_capitalized(w)).map_or(0, |i| i + 1);
    words[start..].join(" ")
}

/// Longest run of capitalized words at the start of `segment`.
fn capitalized_head(segment: &str) -> String {
    segment.split_whitespace().take_while(|w| starts_capitalized(w)).collect::<Vec<_>>().join(" ")
}

fn clean_tail(text: &str) -> &str {
    text.trim().trim_end_matches(['.', '!', '?', ';', ',', '*', '"']).trim()
}

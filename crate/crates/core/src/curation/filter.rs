use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::CurationError;
use crate::assets::JUDGE_PROMPT;
use crate::chat::{single_turn, ImagePart, PolicyClient};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JudgeVerdict {
    /// No usable geographic clues.
    NonLocalizable,
    /// An iconic site that gives the location away.
    Landmark,
    Localizable,
}

impl JudgeVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            JudgeVerdict::NonLocalizable => "non-localizable",
            JudgeVerdict::Landmark => "landmark",
            JudgeVerdict::Localizable => "localizable",
        }
    }

    pub fn parse(reply: &str) -> Option<Self> {
        let first = reply.trim().to_lowercase();
        let word = first.trim_matches(|c: char| !c.is_alphanumeric() && c != '-');
        let word = word.split(|c: char| c.is_whitespace() || c == '.' || c == ',').next().unwrap_or_default();
        match word {
            "non-localizable" | "nonlocalizable" => Some(JudgeVerdict::NonLocalizable),
            "landmark" => Some(JudgeVerdict::Landmark),
            "localizable" => Some(JudgeVerdict::Localizable),
            _ => None,
        }
    }
}

pub trait LocalizabilityJudge: Send + Sync {
    fn judge(&self, sample_id: &str, image: &ImagePart) -> Result<JudgeVerdict, CurationError>;
}

/// Judge backed by a vision chat model and the pinned screening prompt.
/// Requests use the sample id `"<sample_id>#judge"`.
#[derive(Clone)]
pub struct ChatJudge {
    client: Arc<dyn PolicyClient>,
}

impl ChatJudge {
    pub fn new(client: Arc<dyn PolicyClient>) -> Self {
        Self { client }
    }
}

impl LocalizabilityJudge for ChatJudge {
    fn judge(&self, sample_id: &str, image: &ImagePart) -> Result<JudgeVerdict, CurationError> {
        let prompt = JUDGE_PROMPT.load().map_err(|e| CurationError::Proposer(e.to_string()))?;
        let reply = single_turn(self.client.as_ref(), &format!("{sample_id}#judge"), prompt, Some(image))
            .map_err(|e| CurationError::Proposer(e.to_string()))?;
        JudgeVerdict::parse(&reply).ok_or_else(|| CurationError::Proposer(format!("unparseable judge reply {reply:?}")))
    }
}

/// Keep/drop decision for one entry, as written to the drop log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub sample_id: String,
    pub keep: bool,
    /// Judge verdict, absent when the judge failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<JudgeVerdict>,
    /// Set when the entry was kept because the judge failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

impl FilterDecision {
    pub fn reason(&self) -> Option<&'static str> {
        match self.verdict {
            Some(v @ (JudgeVerdict::NonLocalizable | JudgeVerdict::Landmark)) => Some(v.as_str()),
            _ => None,
        }
    }
}

/// Drops non-localizable images and easy landmarks. A failing judge keeps
/// the entry and flags it.
pub fn filter_localizability(sample_id: &str, image: &ImagePart, judge: &dyn LocalizabilityJudge) -> FilterDecision {
    match judge.judge(sample_id, image) {
        Ok(verdict) => {
            let keep = verdict == JudgeVerdict::Localizable;
            log::info!("{sample_id}: {} ({})", if keep { "keep" } else { "drop" }, verdict.as_str());
            FilterDecision { sample_id: sample_id.to_string(), keep, verdict: Some(verdict), flag: None }
        }
        Err(e) => {
            log::warn!("{sample_id}: judge failed, keeping: {e}");
            FilterDecision { sample_id: sample_id.to_string(), keep: true, verdict: None, flag: Some(e.to_string()) }
        }
    }
}

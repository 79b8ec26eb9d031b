//! Dataset curation: the benchmark manifest, model-based localizability
//! filtering, proposal-driven synthesis of cold-start trajectories, and
//! export to chat fine-tuning records.

mod export;
mod filter;
mod manifest;
mod propose;

pub use export::{export_sft_dataset, lint_answers, sft_record, AnswerLint, Rejection, SftMessage, SftRecord};
pub use filter::{filter_localizability, ChatJudge, FilterDecision, JudgeVerdict, LocalizabilityJudge};
pub use manifest::{read_manifest, ManifestEntry, MIN_BENCHMARK_PIXELS};
pub use propose::{
    propose_and_execute, ChatProposer, CurationOutcome, FinalJudgement, Proposer, QueryProposal, RegionProposal,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("sample `{sample_id}`: {message}")]
    Entry { sample_id: String, message: String },
    #[error("proposer failed: {0}")]
    Proposer(String),
    #[error("proposer returned no regions and no queries")]
    EmptyProposal,
    #[error("non-conformant trajectory `{sample_id}`: {reason}")]
    NonConformant { sample_id: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

//! Benchmark evaluation: level-wise verdicts from rules plus an optional
//! model verifier, address extraction and geocoding for distance scoring,
//! and aggregation into report metrics.

mod extract;
mod metrics;
mod record;
mod verify;

pub use extract::{extract_predicted_address, extract_rule, AddressExtractor, ChatExtractor, Extraction};
pub use metrics::{aggregate, render_table, CityAccuracyByType, MetricsReport, UNDER_KM_THRESHOLD};
pub use record::{evaluate_batch, evaluate_sample, EvalClients, EvalRecord, EvalStatus};
pub use verify::{verify_levels, ChatVerifier, LevelVerifier, Verification};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no records to aggregate")]
    Empty,
    #[error("helper model failed: {0}")]
    Helper(String),
    #[error("unparseable helper reply: {0:?}")]
    Unparseable(String),
}

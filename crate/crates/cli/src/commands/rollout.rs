use std::collections::BTreeMap;

use anyhow::Result;
use serde::Serialize;

use geovista_core::agent::{run_batch, RolloutSample, Toolbox};
use geovista_core::protocol::ToolCallStats;
use geovista_core::tools::ImageStore;

use super::{load_manifest, question};
use crate::config::RunConfig;
use crate::output::{header, write_json, write_jsonl};

pub const TRAJECTORY_LOG: &str = "trajectories.jsonl";
pub const SUMMARY: &str = "rollout_summary.json";

#[derive(Debug, Serialize)]
struct Summary {
    samples: usize,
    group_size: usize,
    trajectories: usize,
    terminations: BTreeMap<&'static str, usize>,
    tool_call_stats: ToolCallStats,
    tool_failure_rate: f64,
    protocol_errors: Vec<String>,
}

/// Rolls out every manifest sample `group_size` times. Returns the number of
/// trajectories that ended in a protocol error.
pub fn run(config: &RunConfig, limit: Option<usize>) -> Result<usize> {
    let (entries, base) = load_manifest(config, limit)?;
    let policy = config.policy.client()?;
    let toolbox = Toolbox::new(config.search_provider()?, ImageStore::new(&config.paths.out));
    let q = question(config);
    let samples: Vec<RolloutSample> = entries
        .iter()
        .flat_map(|e| {
            let sample = RolloutSample::from_path(e.sample_id.clone(), e.resolve_image(&base)).with_question(q.clone());
            std::iter::repeat_n(sample, config.group_size)
        })
        .collect();
    log::info!("rolling out {} trajectories on {} workers", samples.len(), config.workers);

    let report = run_batch(&samples, &config.loop_config, policy.as_ref(), &toolbox, &config.sampling, config.workers);

    let summary = Summary {
        samples: entries.len(),
        group_size: config.group_size,
        trajectories: report.trajectories.len(),
        terminations: report.terminations.iter().map(|(t, n)| (t.as_str(), *n)).collect(),
        tool_call_stats: report.tool_call_stats,
        tool_failure_rate: report.failure_rate(),
        protocol_errors: report
            .trajectories
            .iter()
            .filter(|t| t.termination == geovista_core::protocol::Termination::ProtocolError)
            .map(|t| format!("{}: {}", t.sample_id, t.error.as_deref().unwrap_or("protocol error")))
            .collect(),
    };
    let h = header("trajectories", config);
    write_jsonl(&config.paths.out.join(TRAJECTORY_LOG), &h, &report.trajectories)?;
    write_json(&config.paths.out.join(SUMMARY), &header("rollout_summary", config), &summary)?;
    for line in &summary.protocol_errors {
        log::error!("{line}");
    }
    println!(
        "{} trajectories, {} answered, {} protocol errors, tool failure rate {:.4}",
        summary.trajectories,
        summary.terminations.get("answered").copied().unwrap_or(0),
        summary.protocol_errors.len(),
        summary.tool_failure_rate
    );
    Ok(summary.protocol_errors.len())
}

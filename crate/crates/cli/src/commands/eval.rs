use std::collections::HashSet;
use std::path::Path;

use anyhow::{bail, Result};

use geovista_core::eval::{aggregate, evaluate_batch, render_table, ChatExtractor, ChatVerifier, EvalClients, EvalRecord};
use geovista_core::protocol::Trajectory;
use geovista_core::GeoLabel;

use super::{index_by_id, load_manifest, trajectories_path};
use crate::config::RunConfig;
use crate::output::{header, read_records, write_atomic, write_json, write_jsonl};

pub const RECORDS: &str = "eval_records.jsonl";
pub const METRICS: &str = "metrics.json";
pub const TABLE: &str = "metrics.md";

/// Sample ids present on only one side, both lists in first-seen order.
pub fn id_mismatches<'a>(log_ids: impl Iterator<Item = &'a str>, manifest_ids: &[&'a str]) -> (Vec<&'a str>, Vec<&'a str>) {
    let manifest: HashSet<&str> = manifest_ids.iter().copied().collect();
    let mut seen = HashSet::new();
    let mut unknown = Vec::new();
    for id in log_ids {
        if seen.insert(id) && !manifest.contains(id) {
            unknown.push(id);
        }
    }
    let missing = manifest_ids.iter().copied().filter(|id| !seen.contains(id)).collect();
    (unknown, missing)
}

pub fn check_alignment(trajectories: &[Trajectory], manifest_ids: &[&str], require_all: bool) -> Result<()> {
    let (unknown, missing) = id_mismatches(trajectories.iter().map(|t| t.sample_id.as_str()), manifest_ids);
    let missing = if require_all { missing } else { Vec::new() };
    if unknown.is_empty() && missing.is_empty() {
        return Ok(());
    }
    let mut msg = String::from("trajectory log and manifest do not align");
    if !unknown.is_empty() {
        msg.push_str(&format!("\n  in log but not in manifest ({}): {}", unknown.len(), unknown.join(", ")));
    }
    if !missing.is_empty() {
        msg.push_str(&format!("\n  in manifest but not in log ({}): {}", missing.len(), missing.join(", ")));
    }
    bail!(msg)
}

pub fn run(config: &RunConfig, limit: Option<usize>, log_path: Option<&Path>) -> Result<()> {
    let (entries, _) = load_manifest(config, limit)?;
    let path = trajectories_path(config, log_path);
    let (_, trajectories): (_, Vec<Trajectory>) = read_records(&path)?;
    if trajectories.is_empty() {
        bail!("trajectory log {} is empty", path.display());
    }
    let ids: Vec<&str> = entries.iter().map(|e| e.sample_id.as_str()).collect();
    check_alignment(&trajectories, &ids, true)?;

    let by_id = index_by_id(&entries);
    let labels: Vec<GeoLabel> = trajectories
        .iter()
        .map(|t| by_id[t.sample_id.as_str()].label())
        .collect::<Result<_, _>>()?;
    let items: Vec<_> = trajectories
        .iter()
        .zip(&labels)
        .map(|(t, l)| (t, l, by_id[t.sample_id.as_str()].data_type))
        .collect();
    let clients = EvalClients {
        verifier: match &config.verifier {
            Some(m) => Some(std::sync::Arc::new(ChatVerifier::new(m.client()?))),
            None => None,
        },
        extractor: match &config.extractor {
            Some(m) => Some(std::sync::Arc::new(ChatExtractor::new(m.client()?))),
            None => None,
        },
        geocoder: config.geocoder()?,
    };
    let records: Vec<EvalRecord> = evaluate_batch(&items, &clients, config.workers);
    let report = aggregate(&records)?;
    let table = render_table(&[("run", &report)]);

    let out = &config.paths.out;
    let h = header("eval_records", config);
    write_jsonl(&out.join(RECORDS), &h, &records)?;
    write_json(&out.join(METRICS), &header("metrics", config), &report)?;
    let md = format!("<!-- seed={} config_hash={} -->\n{table}", config.seed, h.config_hash);
    write_atomic(&out.join(TABLE), md.as_bytes())?;
    for r in records.iter().filter(|r| !r.flags.is_empty()) {
        log::warn!("{}: {}", r.sample_id, r.flags.join("; "));
    }
    print!("{table}");
    Ok(())
}

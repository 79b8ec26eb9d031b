pub mod curate;
pub mod eval;
pub mod reward;
pub mod rollout;

use std::collections::HashMap;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use geovista_core::agent::DEFAULT_QUESTION;
use geovista_core::curation::{read_manifest, ManifestEntry};

use crate::config::RunConfig;

/// Manifest entries (the first `limit` when given) and the directory image
/// paths resolve against.
pub fn load_manifest(config: &RunConfig, limit: Option<usize>) -> Result<(Vec<ManifestEntry>, PathBuf)> {
    let path = &config.paths.manifest;
    let file = std::fs::File::open(path).with_context(|| format!("cannot open manifest {}", path.display()))?;
    let mut entries = read_manifest(BufReader::new(file)).with_context(|| format!("bad manifest {}", path.display()))?;
    if let Some(n) = limit {
        entries.truncate(n);
    }
    let base = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    Ok((entries, base))
}

pub fn question(config: &RunConfig) -> String {
    config.question.clone().unwrap_or_else(|| DEFAULT_QUESTION.to_string())
}

pub fn index_by_id(entries: &[ManifestEntry]) -> HashMap<&str, &ManifestEntry> {
    entries.iter().map(|e| (e.sample_id.as_str(), e)).collect()
}

pub fn trajectories_path(config: &RunConfig, explicit: Option<&Path>) -> PathBuf {
    explicit.map_or_else(|| config.paths.out.join(rollout::TRAJECTORY_LOG), Path::to_path_buf)
}

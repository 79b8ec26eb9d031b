use std::collections::HashSet;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CurationError;
use crate::label::{DataType, GeoLabel, LevelAliases};
use crate::GeoPoint;

/// Minimum image area for benchmark entries.
pub const MIN_BENCHMARK_PIXELS: u64 = 1_000_000;

/// One manifest line: an image file and its ground-truth location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sample_id: String,
    /// Relative paths resolve against the manifest's directory.
    pub image_path: String,
    pub lat: f64,
    pub lon: f64,
    pub country: String,
    pub province: String,
    pub city: String,
    pub data_type: DataType,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "LevelAliases::is_empty")]
    pub aliases: LevelAliases,
}

impl ManifestEntry {
    pub fn label(&self) -> Result<GeoLabel, CurationError> {
        let point = GeoPoint::new(self.lat, self.lon).map_err(|e| self.error(e.to_string()))?;
        GeoLabel::new(&self.country, &self.province, &self.city, point, self.aliases.clone())
            .map_err(|e| self.error(e.to_string()))
    }

    pub fn resolution(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height)
    }

    /// Benchmark entries need at least [`MIN_BENCHMARK_PIXELS`] pixels.
    pub fn check_benchmark(&self) -> Result<(), CurationError> {
        if self.resolution() < MIN_BENCHMARK_PIXELS {
            return Err(self.error(format!(
                "{}x{} is below the {MIN_BENCHMARK_PIXELS} pixel minimum",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn resolve_image(&self, base_dir: &Path) -> PathBuf {
        let p = Path::new(&self.image_path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base_dir.join(p)
        }
    }

    fn error(&self, message: String) -> CurationError {
        CurationError::Entry { sample_id: self.sample_id.clone(), message }
    }
}

/// Parses a line-delimited manifest. Blank lines and a leading log header
/// line are skipped; labels are validated and sample ids must be unique.
pub fn read_manifest(reader: impl BufRead) -> Result<Vec<ManifestEntry>, CurationError> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || (entries.is_empty() && line.starts_with("{\"header\":")) {
            continue;
        }
        let fail = |message: String| CurationError::Manifest { line: i + 1, message };
        let entry: ManifestEntry = serde_json::from_str(&line).map_err(|e| fail(e.to_string()))?;
        entry.label().map_err(|e| fail(e.to_string()))?;
        if !seen.insert(entry.sample_id.clone()) {
            return Err(fail(format!("duplicate sample_id `{}`", entry.sample_id)));
        }
        entries.push(entry);
    }
    Ok(entries)
}

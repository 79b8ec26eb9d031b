//! Output files are written to a temporary file in the target directory and
//! renamed into place, so a failed command never leaves a partial file.

use std::io::{BufReader, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use geovista_core::protocol::{header_line, read_jsonl, LogHeader};

use crate::config::RunConfig;

pub fn header(kind: &str, config: &RunConfig) -> LogHeader {
    LogHeader { kind: kind.to_string(), seed: config.seed, config_hash: config.hash(), extra: Default::default() }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Header line followed by one JSON line per record.
pub fn write_jsonl<T: Serialize>(path: &Path, header: &LogHeader, records: &[T]) -> Result<()> {
    let mut buf = header_line(header)?;
    buf.push('\n');
    for r in records {
        buf.push_str(&serde_json::to_string(r)?);
        buf.push('\n');
    }
    write_atomic(path, buf.as_bytes())
}

/// Pretty JSON object `{"header": ..., <fields of value>}`.
pub fn write_json<T: Serialize>(path: &Path, header: &LogHeader, value: &T) -> Result<()> {
    let mut obj = serde_json::Map::new();
    obj.insert("header".into(), serde_json::to_value(header)?);
    match serde_json::to_value(value)? {
        serde_json::Value::Object(fields) => obj.extend(fields),
        other => {
            obj.insert("data".into(), other);
        }
    }
    let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(obj))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_records<T: serde::de::DeserializeOwned>(path: &Path) -> Result<(Option<LogHeader>, Vec<T>)> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_jsonl(BufReader::new(file)).with_context(|| format!("cannot parse {}", path.display()))
}

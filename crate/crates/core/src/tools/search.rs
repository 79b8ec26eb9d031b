use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::http::JsonClient;
use super::{HttpEndpoint, ProviderError, ToolFailure};
use crate::assets::sha256_hex;
use crate::text::normalize_key;

pub const DEFAULT_SEARCH_LIMIT: usize = 10;
/// Snippets longer than this are cut in observations to save context.
pub const SNIPPET_CHAR_LIMIT: usize = 500;

/// One web search hit. The URL is validated on construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawResult")]
pub struct SearchResult {
    pub title: String,
    pub snippet: String,
    pub url: String,
}

#[derive(Deserialize)]
struct RawResult {
    #[serde(default)]
    title: String,
    #[serde(default)]
    snippet: String,
    url: String,
}

impl TryFrom<RawResult> for SearchResult {
    type Error = String;

    fn try_from(raw: RawResult) -> Result<Self, Self::Error> {
        SearchResult::new(raw.title, raw.snippet, raw.url)
    }
}

impl SearchResult {
    pub fn new(title: impl Into<String>, snippet: impl Into<String>, url: impl Into<String>) -> Result<Self, String> {
        let url = url.into();
        if url.trim().is_empty() {
            return Err("search result url is empty".into());
        }
        url::Url::parse(url.trim()).map_err(|e| format!("invalid url `{url}`: {e}"))?;
        Ok(Self { title: title.into(), snippet: snippet.into(), url: url.trim().to_string() })
    }
}

/// A web search backend. Implementations must tolerate concurrent callers.
pub trait SearchProvider: Send + Sync {
    fn search(&self, query: &str, limit: usize) -> Result<Vec<SearchResult>, ProviderError>;
}

/// Runs a search, enforcing the empty-query rule and the result limit.
pub fn search_web(
    provider: &dyn SearchProvider,
    query: &str,
    limit: usize,
) -> Result<Vec<SearchResult>, ToolFailure> {
    let query = query.trim();
    if query.is_empty() {
        return Err(ToolFailure::EmptyQuery);
    }
    let mut results = provider
        .search(query, limit)
        .map_err(|e| ToolFailure::SearchUnavailable(e.to_string()))?;
    results.truncate(limit);
    Ok(results)
}

/// Numbered observation text for the model.
pub fn render_search_observation(query: &str, results: &[SearchResult]) -> String {
    if results.is_empty() {
        return format!("No results found for \"{}\".", query.trim());
    }
    let mut out = format!("Search results for \"{}\":\n", query.trim());
    for (i, r) in results.iter().enumerate() {
        let snippet: String = if r.snippet.chars().count() > SNIPPET_CHAR_LIMIT {
            let cut: String = r.snippet.chars().take(SNIPPET_CHAR_LIMIT).collect();
            format!("{cut}...")
        } else {
            r.snippet.clone()
        };
        out.push_str(&format!("\n[{}] {}\n{}\nURL: {}\n", i + 1, r.title.trim(), snippet.trim(), r.url));
    }
    out
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum FixtureEntry {
    Results(Vec<SearchResult>),
    Fault { error: String },
}

/// Hand-written results keyed by normalized query. Unknown queries return no
/// results; entries of the form `{"error": "..."}` simulate provider faults.
#[derive(Debug, Clone, Default)]
pub struct FixtureSearch {
    entries: HashMap<String, FixtureEntry>,
}

impl FixtureSearch {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let raw: HashMap<String, FixtureEntry> = serde_json::from_str(text)?;
        Ok(Self { entries: raw.into_iter().map(|(k, v)| (normalize_key(&k), v)).collect() })
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text).map_err(std::io::Error::other)
    }

    pub fn insert(&mut self, query: &str, results: Vec<SearchResult>) {
        self.entries.insert(normalize_key(query), FixtureEntry::Results(results));
    }

    pub fn insert_fault(&mut self, query: &str, error: &str) {
        self.entries.insert(normalize_key(query), FixtureEntry::Fault { error: error.into() });
    }
}

impl SearchProvider for FixtureSearch {
    fn search(&self, query: &str, limit: usize) -> Result<Vec<SearchResult>, ProviderError> {
        match self.entries.get(&normalize_key(query)) {
            Some(FixtureEntry::Results(r)) => Ok(r.iter().take(limit).cloned().collect()),
            Some(FixtureEntry::Fault { error }) if error == "timeout" => Err(ProviderError::Timeout),
            Some(FixtureEntry::Fault { error }) => Err(ProviderError::Fault(error.clone())),
            None => Ok(Vec::new()),
        }
    }
}

/// Live search over HTTP. Request body `{"query", "limit"}`; the response is
/// either a result array or an object with a `results` array. Entries with
/// unusable URLs are skipped.
#[derive(Debug)]
pub struct HttpSearch {
    client: JsonClient,
}

impl HttpSearch {
    pub fn new(endpoint: &HttpEndpoint) -> Result<Self, ProviderError> {
        Ok(Self { client: JsonClient::new(endpoint)? })
    }
}

impl SearchProvider for HttpSearch {
    fn search(&self, query: &str, limit: usize) -> Result<Vec<SearchResult>, ProviderError> {
        let (status, body) = self.client.post(&serde_json::json!({ "query": query, "limit": limit }))?;
        if status >= 400 {
            return Err(ProviderError::BadResponse(format!("HTTP {status}")));
        }
        let items = match &body {
            Value::Array(items) => items,
            Value::Object(obj) => match obj.get("results") {
                Some(Value::Array(items)) => items,
                _ => return Err(ProviderError::BadResponse("missing `results` array".into())),
            },
            _ => return Err(ProviderError::BadResponse("expected a json array or object".into())),
        };
        Ok(items
            .iter()
            .filter_map(|v| serde_json::from_value::<SearchResult>(v.clone()).ok())
            .take(limit)
            .collect())
    }
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    query: String,
    limit: usize,
    results: Vec<SearchResult>,
}

/// On-disk cache in front of another provider. Successful responses are
/// stored as `<dir>/<sha256>.json`; errors are never cached.
pub struct CachedSearch<P> {
    inner: P,
    dir: PathBuf,
    memory: RwLock<HashMap<String, Vec<SearchResult>>>,
}

impl<P: SearchProvider> CachedSearch<P> {
    pub fn new(inner: P, dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { inner, dir, memory: RwLock::new(HashMap::new()) })
    }

    fn key(query: &str, limit: usize) -> String {
        sha256_hex(format!("{}\n{limit}", normalize_key(query)).as_bytes())
    }

    fn read_disk(&self, key: &str) -> Option<Vec<SearchResult>> {
        let text = fs::read_to_string(self.dir.join(format!("{key}.json"))).ok()?;
        serde_json::from_str::<CacheRecord>(&text).ok().map(|r| r.results)
    }

    fn write_disk(&self, key: &str, record: &CacheRecord) -> std::io::Result<()> {
        let tmp = self.dir.join(format!(".{key}.{}.{:?}.tmp", std::process::id(), std::thread::current().id()));
        fs::write(&tmp, serde_json::to_vec(record)?)?;
        fs::rename(tmp, self.dir.join(format!("{key}.json")))
    }
}

impl<P: SearchProvider> SearchProvider for CachedSearch<P> {
    fn search(&self, query: &str, limit: usize) -> Result<Vec<SearchResult>, ProviderError> {
        let key = Self::key(query, limit);
        if let Some(hit) = self.memory.read().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Ok(hit.clone());
        }
        let results = match self.read_disk(&key) {
            Some(r) => r,
            None => {
                let r = self.inner.search(query, limit)?;
                let record = CacheRecord { query: query.to_string(), limit, results: r };
                if let Err(e) = self.write_disk(&key, &record) {
                    log::warn!("search cache write failed: {e}");
                }
                record.results
            }
        };
        self.memory
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(key, results.clone());
        Ok(results)
    }
}

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::http::JsonClient;
use super::{HttpEndpoint, ProviderError};
use crate::text::normalize_key;
use crate::GeoPoint;

/// Forward geocoding backend: address text to coordinates.
pub trait GeocodeProvider: Send + Sync {
    /// `Ok(None)` means the provider has no match for the address.
    fn lookup(&self, address: &str) -> Result<Option<GeoPoint>, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeocodeStatus {
    Ok,
    NotFound,
    ProviderError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum GeocodeOutcome {
    Ok { point: GeoPoint },
    NotFound,
    ProviderError { message: String },
}

/// Result of geocoding one address. A point is present exactly when the
/// status is `ok`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeocodeResult {
    pub query_text: String,
    #[serde(flatten)]
    pub outcome: GeocodeOutcome,
}

impl GeocodeResult {
    pub fn status(&self) -> GeocodeStatus {
        match self.outcome {
            GeocodeOutcome::Ok { .. } => GeocodeStatus::Ok,
            GeocodeOutcome::NotFound => GeocodeStatus::NotFound,
            GeocodeOutcome::ProviderError { .. } => GeocodeStatus::ProviderError,
        }
    }

    pub fn point(&self) -> Option<GeoPoint> {
        match self.outcome {
            GeocodeOutcome::Ok { point } => Some(point),
            _ => None,
        }
    }
}

/// Caching front end over a provider. Lookups are keyed by normalized
/// address; provider errors are returned but not cached.
#[derive(Clone)]
pub struct Geocoder {
    provider: Arc<dyn GeocodeProvider>,
    cache: Arc<RwLock<HashMap<String, GeocodeOutcome>>>,
}

impl Geocoder {
    pub fn new(provider: Arc<dyn GeocodeProvider>) -> Self {
        Self { provider, cache: Arc::new(RwLock::new(HashMap::new())) }
    }

    pub fn geocode(&self, address: &str) -> GeocodeResult {
        let key = normalize_key(address);
        let query_text = address.trim().to_string();
        if key.is_empty() {
            return GeocodeResult { query_text, outcome: GeocodeOutcome::NotFound };
        }
        if let Some(hit) = self.cache.read().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return GeocodeResult { query_text, outcome: hit.clone() };
        }
        let outcome = match self.provider.lookup(&query_text) {
            Ok(Some(point)) => GeocodeOutcome::Ok { point },
            Ok(None) => GeocodeOutcome::NotFound,
            Err(e) => return GeocodeResult { query_text, outcome: GeocodeOutcome::ProviderError { message: e.to_string() } },
        };
        self.cache
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(key, outcome.clone());
        GeocodeResult { query_text, outcome }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum FixtureEntry {
    Point(GeoPoint),
    Fault { error: String },
    Missing(()),
}

/// Coordinates keyed by normalized address. A `null` entry or an unknown
/// address is "not found"; `{"error": "..."}` simulates a provider fault.
#[derive(Debug, Clone, Default)]
pub struct FixtureGeocoder {
    entries: HashMap<String, FixtureEntry>,
}

impl FixtureGeocoder {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let raw: HashMap<String, FixtureEntry> = serde_json::from_str(text)?;
        Ok(Self { entries: raw.into_iter().map(|(k, v)| (normalize_key(&k), v)).collect() })
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text).map_err(std::io::Error::other)
    }

    pub fn insert(&mut self, address: &str, point: GeoPoint) {
        self.entries.insert(normalize_key(address), FixtureEntry::Point(point));
    }

    pub fn insert_fault(&mut self, address: &str, error: &str) {
        self.entries.insert(normalize_key(address), FixtureEntry::Fault { error: error.into() });
    }
}

impl GeocodeProvider for FixtureGeocoder {
    fn lookup(&self, address: &str) -> Result<Option<GeoPoint>, ProviderError> {
        match self.entries.get(&normalize_key(address)) {
            Some(FixtureEntry::Point(p)) => Ok(Some(*p)),
            Some(FixtureEntry::Fault { error }) if error == "timeout" => Err(ProviderError::Timeout),
            Some(FixtureEntry::Fault { error }) => Err(ProviderError::Fault(error.clone())),
            Some(FixtureEntry::Missing(())) | None => Ok(None),
        }
    }
}

/// Live geocoding over HTTP. Request body `{"address"}`; a hit is
/// `{"lat", "lon"}`, a miss is HTTP 404 or a body without coordinates.
#[derive(Debug)]
pub struct HttpGeocoder {
    client: JsonClient,
}

impl HttpGeocoder {
    pub fn new(endpoint: &HttpEndpoint) -> Result<Self, ProviderError> {
        Ok(Self { client: JsonClient::new(endpoint)? })
    }
}

impl GeocodeProvider for HttpGeocoder {
    fn lookup(&self, address: &str) -> Result<Option<GeoPoint>, ProviderError> {
        let (status, body) = self.client.post(&serde_json::json!({ "address": address }))?;
        if status == 404 {
            return Ok(None);
        }
        if status >= 400 {
            return Err(ProviderError::BadResponse(format!("HTTP {status}")));
        }
        let coords = (body.get("lat").and_then(Value::as_f64), body.get("lon").and_then(Value::as_f64));
        match coords {
            (Some(lat), Some(lon)) => GeoPoint::new(lat, lon)
                .map(Some)
                .map_err(|e| ProviderError::BadResponse(e.to_string())),
            _ => Ok(None),
        }
    }
}

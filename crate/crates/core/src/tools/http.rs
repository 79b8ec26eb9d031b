use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::TokenBucket;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("request timed out")]
    Timeout,
    #[error("quota exhausted")]
    Quota,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unexpected response: {0}")]
    BadResponse(String),
    #[error("injected fault: {0}")]
    Fault(String),
}

/// Location and credentials of a JSON-over-HTTP service. Credentials are read
/// from the named environment variable at connection time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpEndpoint {
    pub base_url: String,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub requests_per_second: Option<f64>,
}

fn default_timeout_secs() -> u64 {
    30
}

impl HttpEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key_env: None,
            timeout_secs: default_timeout_secs(),
            requests_per_second: None,
        }
    }
}

/// Blocking JSON client with an optional shared rate limit.
#[derive(Debug)]
pub(crate) struct JsonClient {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
    limiter: Option<TokenBucket>,
}

impl JsonClient {
    pub(crate) fn new(endpoint: &HttpEndpoint) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(endpoint.timeout_secs.max(1)))
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let api_key = match &endpoint.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                ProviderError::Transport(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let limiter = endpoint.requests_per_second.map(|r| TokenBucket::new(r, 1));
        Ok(Self { client, url: endpoint.base_url.clone(), api_key, limiter })
    }

    /// POSTs `body` and returns the HTTP status with the decoded JSON body
    /// (`Value::Null` when the body is empty).
    pub(crate) fn post<B: Serialize + ?Sized>(&self, body: &B) -> Result<(u16, Value), ProviderError> {
        if let Some(limiter) = &self.limiter {
            limiter.acquire();
        }
        let mut req = self.client.post(&self.url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(classify)?;
        let status = resp.status().as_u16();
        if status == 429 {
            return Err(ProviderError::Quota);
        }
        let text = resp.text().map_err(classify)?;
        if status >= 500 {
            return Err(ProviderError::Transport(format!("HTTP {status}")));
        }
        let value = if text.trim().is_empty() {
            Value::Null
        } else {
            serde_json::from_str(&text).map_err(|e| ProviderError::BadResponse(e.to_string()))?
        };
        Ok((status, value))
    }
}

fn classify(e: reqwest::Error) -> ProviderError {
    if e.is_timeout() {
        ProviderError::Timeout
    } else {
        ProviderError::Transport(e.to_string())
    }
}

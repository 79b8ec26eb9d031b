//! Chat-style model clients: the policy being rolled out, and the helper
//! models used for verification, address extraction, filtering and proposals.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use base64::Engine;
use image::DynamicImage;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::tools::{HttpEndpoint, ProviderError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

/// Image encoded once as a PNG data URL when it enters a conversation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePart {
    pub data_url: Arc<str>,
    pub width: u32,
    pub height: u32,
}

impl ImagePart {
    pub fn from_image(image: &DynamicImage) -> std::io::Result<Self> {
        let png = crate::tools::encode_png(image)?;
        Ok(Self::from_png(&png, image.width(), image.height()))
    }

    pub fn from_png(png: &[u8], width: u32, height: u32) -> Self {
        let b64 = base64::engine::general_purpose::STANDARD.encode(png);
        Self { data_url: Arc::from(format!("data:image/png;base64,{b64}")), width, height }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContentPart {
    Text(String),
    Image(ImagePart),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatMessage {
    pub role: Role,
    pub content: Vec<ContentPart>,
}

impl ChatMessage {
    pub fn text(role: Role, text: impl Into<String>) -> Self {
        Self { role, content: vec![ContentPart::Text(text.into())] }
    }

    pub fn system(text: impl Into<String>) -> Self {
        Self::text(Role::System, text)
    }

    pub fn user(text: impl Into<String>) -> Self {
        Self::text(Role::User, text)
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self::text(Role::Assistant, text)
    }

    /// Concatenated text parts.
    pub fn text_content(&self) -> String {
        self.content
            .iter()
            .filter_map(|p| match p {
                ContentPart::Text(t) => Some(t.as_str()),
                ContentPart::Image(_) => None,
            })
            .collect()
    }

    pub fn image_count(&self) -> usize {
        self.content.iter().filter(|p| matches!(p, ContentPart::Image(_))).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    #[serde(default = "default_temperature")]
    pub temperature: f32,
    #[serde(default = "default_max_new_tokens")]
    pub max_new_tokens: u32,
    #[serde(default)]
    pub top_p: Option<f32>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_temperature() -> f32 {
    1.0
}

fn default_max_new_tokens() -> u32 {
    2048
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self { temperature: default_temperature(), max_new_tokens: default_max_new_tokens(), top_p: None, seed: None }
    }
}

/// One completion request.
#[derive(Debug, Clone, Copy)]
pub struct ChatRequest<'a> {
    pub sample_id: &'a str,
    pub messages: &'a [ChatMessage],
    pub sampling: &'a SamplingParams,
    pub tools_enabled: bool,
}

impl ChatRequest<'_> {
    /// Number of assistant turns already in the conversation.
    pub fn turn_index(&self) -> usize {
        self.messages.iter().filter(|m| m.role == Role::Assistant).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl Usage {
    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyReply {
    pub text: String,
    pub usage: Option<Usage>,
}

impl PolicyReply {
    pub fn text(text: impl Into<String>) -> Self {
        Self { text: text.into(), usage: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    /// Network-level failure; worth retrying.
    #[error("transport error: {0}")]
    Transport(String),
    /// The endpoint answered but the request or response is unusable.
    #[error("request rejected: {0}")]
    Rejected(String),
}

impl PolicyError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, PolicyError::Transport(_))
    }
}

impl From<ProviderError> for PolicyError {
    fn from(e: ProviderError) -> Self {
        match e {
            ProviderError::BadResponse(m) => PolicyError::Rejected(m),
            other => PolicyError::Transport(other.to_string()),
        }
    }
}

/// A chat completion endpoint. Implementations must tolerate concurrent calls.
pub trait PolicyClient: Send + Sync {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<PolicyReply, PolicyError>;
}

impl<F> PolicyClient for F
where
    F: Fn(&ChatRequest<'_>) -> Result<PolicyReply, PolicyError> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest<'_>) -> Result<PolicyReply, PolicyError> {
        self(request)
    }
}

/// One scripted reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptStep {
    Reply(String),
    WithUsage { text: String, usage: Usage },
    Fail { error: String },
}

/// Deterministic client replaying canned replies per sample.
///
/// The reply for a request is picked by the number of assistant turns already
/// in the conversation; past the end of a script the last step repeats.
/// Samples without their own script fall back to `default`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedPolicy {
    #[serde(default)]
    pub default: Vec<ScriptStep>,
    #[serde(default)]
    pub samples: HashMap<String, Vec<ScriptStep>>,
}

impl ScriptedPolicy {
    pub fn new(default: Vec<ScriptStep>) -> Self {
        Self { default, samples: HashMap::new() }
    }

    pub fn replies<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(replies.into_iter().map(|r| ScriptStep::Reply(r.into())).collect())
    }

    pub fn with_sample(mut self, sample_id: impl Into<String>, steps: Vec<ScriptStep>) -> Self {
        self.samples.insert(sample_id.into(), steps);
        self
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }
}

impl PolicyClient for ScriptedPolicy {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<PolicyReply, PolicyError> {
        let steps = self.samples.get(request.sample_id).unwrap_or(&self.default);
        let Some(last) = steps.last() else {
            return Err(PolicyError::Rejected(format!("no script for sample `{}`", request.sample_id)));
        };
        match steps.get(request.turn_index()).unwrap_or(last) {
            ScriptStep::Reply(text) => Ok(PolicyReply::text(text.clone())),
            ScriptStep::WithUsage { text, usage } => Ok(PolicyReply { text: text.clone(), usage: Some(*usage) }),
            ScriptStep::Fail { error } => Err(PolicyError::Transport(error.clone())),
        }
    }
}

/// Settings for an OpenAI-compatible chat completions endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatEndpoint {
    #[serde(flatten)]
    pub http: HttpEndpoint,
    pub model: String,
}

/// Live client for an OpenAI-compatible `chat/completions` endpoint.
/// `base_url` is the full completions URL.
#[derive(Debug)]
pub struct HttpPolicy {
    client: crate::tools::JsonClientHandle,
    model: String,
}

impl HttpPolicy {
    pub fn new(endpoint: &ChatEndpoint) -> Result<Self, PolicyError> {
        Ok(Self { client: crate::tools::JsonClientHandle::new(&endpoint.http)?, model: endpoint.model.clone() })
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f32,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    top_p: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: Role,
    content: Vec<WirePart<'a>>,
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum WirePart<'a> {
    Text { text: &'a str },
    ImageUrl { image_url: WireImageUrl<'a> },
}

#[derive(Serialize)]
struct WireImageUrl<'a> {
    url: &'a str,
}

pub(crate) fn wire_body<'a>(model: &'a str, request: &ChatRequest<'a>) -> impl Serialize + 'a {
    let messages = request
        .messages
        .iter()
        .map(|m| WireMessage {
            role: m.role,
            content: m
                .content
                .iter()
                .map(|p| match p {
                    ContentPart::Text(text) => WirePart::Text { text },
                    ContentPart::Image(img) => WirePart::ImageUrl { image_url: WireImageUrl { url: &img.data_url } },
                })
                .collect(),
        })
        .collect();
    WireRequest {
        model,
        messages,
        temperature: request.sampling.temperature,
        max_tokens: request.sampling.max_new_tokens,
        top_p: request.sampling.top_p,
        seed: request.sampling.seed,
    }
}

impl PolicyClient for HttpPolicy {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<PolicyReply, PolicyError> {
        let (status, body) = self.client.post(&wire_body(&self.model, request))?;
        if status >= 400 {
            return Err(PolicyError::Rejected(format!("HTTP {status}: {body}")));
        }
        let text = body
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| PolicyError::Rejected("response has no choices[0].message.content".into()))?;
        let usage = body.get("usage").and_then(|u| {
            Some(Usage {
                prompt_tokens: u.get("prompt_tokens")?.as_u64()?,
                completion_tokens: u.get("completion_tokens")?.as_u64()?,
            })
        });
        Ok(PolicyReply { text: text.to_string(), usage })
    }
}

/// Sends one user message (optionally with an image) with greedy sampling and
/// returns the reply text. Used by the helper models.
pub fn single_turn(
    client: &dyn PolicyClient,
    sample_id: &str,
    prompt: &str,
    image: Option<&ImagePart>,
) -> Result<String, PolicyError> {
    let mut content = Vec::with_capacity(2);
    if let Some(img) = image {
        content.push(ContentPart::Image(img.clone()));
    }
    content.push(ContentPart::Text(prompt.to_string()));
    let messages = [ChatMessage { role: Role::User, content }];
    let sampling = SamplingParams { temperature: 0.0, max_new_tokens: 1024, top_p: None, seed: Some(0) };
    let request = ChatRequest { sample_id, messages: &messages, sampling: &sampling, tools_enabled: false };
    client.complete(&request).map(|r| r.text)
}

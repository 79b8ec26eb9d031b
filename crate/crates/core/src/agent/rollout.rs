use std::path::PathBuf;
use std::sync::Arc;
use std::thread;

use image::DynamicImage;

use super::config::LoopConfig;
use super::context::{estimate_context_tokens, parts_tokens};
use crate::assets::{FORCED_ANSWER_PROMPT, SYSTEM_PROMPT};
use crate::chat::{
    ChatMessage, ChatRequest, ContentPart, ImagePart, PolicyClient, PolicyError, PolicyReply, Role,
    SamplingParams, Usage,
};
use crate::protocol::{
    parse_model_output, Action, Observation, Payload, Termination, ToolInvocation, Trajectory, Turn,
};
use crate::tools::{
    crop_and_zoom, downsample_to_budget, encode_png, load_image, render_search_observation, search_web,
    BudgetedImage, ImageStore, SearchProvider, ToolFailure,
};

pub const DEFAULT_QUESTION: &str =
    "Where was this image taken? Identify the country, the province or state, and the city.";

/// Where a sample's image comes from.
#[derive(Debug, Clone)]
pub enum SampleImage {
    Path(PathBuf),
    Loaded(Arc<DynamicImage>),
}

/// One rollout input: an image and the question asked about it.
#[derive(Debug, Clone)]
pub struct RolloutSample {
    pub sample_id: String,
    pub image: SampleImage,
    pub question: String,
}

impl RolloutSample {
    pub fn from_path(sample_id: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        Self { sample_id: sample_id.into(), image: SampleImage::Path(path.into()), question: DEFAULT_QUESTION.into() }
    }

    pub fn from_image(sample_id: impl Into<String>, image: DynamicImage) -> Self {
        Self {
            sample_id: sample_id.into(),
            image: SampleImage::Loaded(Arc::new(image)),
            question: DEFAULT_QUESTION.into(),
        }
    }

    pub fn with_question(mut self, question: impl Into<String>) -> Self {
        self.question = question.into();
        self
    }

    fn source_name(&self) -> String {
        match &self.image {
            SampleImage::Path(p) => p.display().to_string(),
            SampleImage::Loaded(_) => self.sample_id.clone(),
        }
    }
}

/// Tool backends shared by all rollouts of a run.
#[derive(Clone, Default)]
pub struct Toolbox {
    pub search: Option<Arc<dyn SearchProvider>>,
    pub store: ImageStore,
}

impl Toolbox {
    pub fn new(search: Option<Arc<dyn SearchProvider>>, store: ImageStore) -> Self {
        Self { search, store }
    }
}

impl std::fmt::Debug for Toolbox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Toolbox")
            .field("search", &self.search.is_some())
            .field("store", &self.store)
            .finish()
    }
}

struct Executed {
    observation: Observation,
    content: Vec<ContentPart>,
    failed: bool,
}

struct Rollout<'a> {
    config: &'a LoopConfig,
    policy: &'a dyn PolicyClient,
    toolbox: &'a Toolbox,
    sampling: &'a SamplingParams,
    sample_id: &'a str,
    image: BudgetedImage,
    messages: Vec<ChatMessage>,
    /// Usage reported with the latest reply, and the message count it covers.
    usage_mark: Option<(Usage, usize)>,
}

/// Runs one sample through the agent loop.
///
/// The loop stops on an answer, after `max_turns` turns, or when the
/// conversation outgrows `max_context_tokens`. On a cap, a final tools-disabled
/// turn asks for an answer if `force_final_answer` is set. Tool failures are
/// shown to the model and counted; they never end the rollout. An unusable
/// sample or an unreachable policy yields `protocol_error`.
pub fn run_trajectory(
    sample: &RolloutSample,
    config: &LoopConfig,
    policy: &dyn PolicyClient,
    toolbox: &Toolbox,
    sampling: &SamplingParams,
) -> Trajectory {
    let mut traj = Trajectory::new(sample.sample_id.clone());
    let mut rollout = match Rollout::start(sample, config, policy, toolbox, sampling) {
        Ok(r) => r,
        Err(message) => {
            traj.error = Some(message);
            return traj;
        }
    };

    let mut cap = Termination::TurnCap;
    for _ in 0..config.max_turns {
        if rollout.context_tokens() > config.max_context_tokens {
            cap = Termination::ContextCap;
            break;
        }
        let reply = match rollout.ask(true) {
            Ok(r) => r,
            Err(e) => {
                traj.error = Some(e.to_string());
                return traj;
            }
        };
        let parsed = parse_model_output(&reply.text);
        let mut turn = Turn {
            thought: parsed.think,
            action: Action::Answer { text: String::new() },
            observation: None,
            forced: false,
            warnings: parsed.warnings,
        };
        let executed = match parsed.payload {
            Payload::Answer(text) => {
                turn.action = Action::Answer { text: text.clone() };
                traj.turns.push(turn);
                traj.final_answer = Some(text);
                traj.termination = Termination::Answered;
                return traj;
            }
            Payload::Tool(call) => {
                let executed = rollout.execute(&call);
                traj.tool_call_stats.counts_mut(Some(call.name())).record(executed.failed);
                turn.action = Action::ToolCall { call };
                executed
            }
            Payload::Malformed(m) => {
                if m.reason.is_tool_attempt() {
                    traj.tool_call_stats.counts_mut(m.tool).record(true);
                }
                let message = if m.detail.is_empty() {
                    format!("Error: {}", m.reason)
                } else {
                    format!("Error: {} ({})", m.reason, m.detail)
                };
                turn.action = Action::Malformed(m);
                Executed {
                    content: vec![ContentPart::Text(wrap_response(&message))],
                    observation: Observation::Error { message },
                    failed: true,
                }
            }
        };
        turn.observation = Some(executed.observation);
        traj.turns.push(turn);
        rollout.messages.push(ChatMessage { role: Role::User, content: executed.content });
    }

    traj.termination = cap;
    if config.force_final_answer {
        rollout.messages.push(ChatMessage::user(FORCED_ANSWER_PROMPT.text));
        let reply = match rollout.ask(false) {
            Ok(r) => r,
            Err(e) => {
                traj.termination = Termination::ProtocolError;
                traj.error = Some(e.to_string());
                return traj;
            }
        };
        let parsed = parse_model_output(&reply.text);
        let action = match parsed.payload {
            Payload::Answer(text) => {
                traj.final_answer = Some(text.clone());
                traj.termination = Termination::Answered;
                Action::Answer { text }
            }
            Payload::Tool(call) => Action::ToolCall { call },
            Payload::Malformed(m) => Action::Malformed(m),
        };
        traj.turns.push(Turn { thought: parsed.think, action, observation: None, forced: true, warnings: parsed.warnings });
    }
    traj
}

fn wrap_response(text: &str) -> String {
    format!("<tool_response>\n{text}\n</tool_response>")
}

impl<'a> Rollout<'a> {
    fn start(
        sample: &'a RolloutSample,
        config: &'a LoopConfig,
        policy: &'a dyn PolicyClient,
        toolbox: &'a Toolbox,
        sampling: &'a SamplingParams,
    ) -> Result<Self, String> {
        config.validate().map_err(|e| e.to_string())?;
        if sample.question.trim().is_empty() {
            return Err("empty question".into());
        }
        let source = match &sample.image {
            SampleImage::Path(p) => Arc::new(load_image(p).map_err(|e| e.to_string())?),
            SampleImage::Loaded(img) => Arc::clone(img),
        };
        let image = downsample_to_budget(sample.source_name(), source, config.pixel_budget).map_err(|e| e.to_string())?;
        let part = ImagePart::from_image(&image.presented).map_err(|e| format!("cannot encode image: {e}"))?;
        let system = SYSTEM_PROMPT.load().map_err(|e| e.to_string())?;
        let messages = vec![
            ChatMessage::system(system),
            ChatMessage {
                role: Role::User,
                content: vec![ContentPart::Image(part), ContentPart::Text(sample.question.clone())],
            },
        ];
        Ok(Self {
            config,
            policy,
            toolbox,
            sampling,
            sample_id: &sample.sample_id,
            image,
            messages,
            usage_mark: None,
        })
    }

    fn context_tokens(&self) -> u64 {
        let cost = self.config.image_token_cost;
        match self.usage_mark {
            Some((usage, covered)) => usage.total() + parts_tokens(&self.messages[covered..], cost),
            None => estimate_context_tokens(&self.messages[1..], None, cost),
        }
    }

    /// Requests the next assistant message, retrying transport errors with
    /// exponential backoff, and appends it to the history.
    fn ask(&mut self, tools_enabled: bool) -> Result<PolicyReply, PolicyError> {
        let request = ChatRequest {
            sample_id: self.sample_id,
            messages: &self.messages,
            sampling: self.sampling,
            tools_enabled,
        };
        let retries = self.config.retries();
        let mut attempt = 0;
        let reply = loop {
            match self.policy.complete(&request) {
                Ok(reply) => break reply,
                Err(e) if e.is_retryable() && attempt < retries => {
                    log::warn!("{}: policy call failed ({e}), retry {}/{retries}", self.sample_id, attempt + 1);
                    thread::sleep(self.config.backoff(attempt));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        };
        self.messages.push(ChatMessage::assistant(reply.text.clone()));
        if let Some(usage) = reply.usage {
            self.usage_mark = Some((usage, self.messages.len()));
        }
        Ok(reply)
    }

    fn execute(&self, call: &ToolInvocation) -> Executed {
        let tool = call.name().as_str();
        let outcome = match call {
            ToolInvocation::ZoomIn { bbox } => self.zoom(*bbox),
            ToolInvocation::SearchWeb { query } => self.search(query),
        };
        match outcome {
            Ok(executed) => executed,
            Err(failure) => {
                let message = failure.observation_text(tool);
                Executed {
                    content: vec![ContentPart::Text(wrap_response(&message))],
                    observation: Observation::Error { message },
                    failed: true,
                }
            }
        }
    }

    fn zoom(&self, bbox: crate::protocol::BoundingBox) -> Result<Executed, ToolFailure> {
        if !self.config.tool_set.image_zoom_in_tool {
            return Err(ToolFailure::Disabled);
        }
        let zoomed = crop_and_zoom(&self.image, bbox, &self.config.zoom())?;
        let (w, h) = (zoomed.meta.width, zoomed.meta.height);
        let png = encode_png(&zoomed.presented).map_err(|e| ToolFailure::Image(e.to_string()))?;
        let stored = self.toolbox.store.put_png(&png, w, h).map_err(|e| ToolFailure::Image(e.to_string()))?;
        Ok(Executed {
            observation: Observation::Image(stored),
            content: vec![
                ContentPart::Text("<tool_response>\n".into()),
                ContentPart::Image(ImagePart::from_png(&png, w, h)),
                ContentPart::Text("\n</tool_response>".into()),
            ],
            failed: false,
        })
    }

    fn search(&self, query: &str) -> Result<Executed, ToolFailure> {
        let provider = match (&self.toolbox.search, self.config.tool_set.search_web) {
            (Some(p), true) => p,
            _ => return Err(ToolFailure::Disabled),
        };
        let results = search_web(provider.as_ref(), query, self.config.search_limit)?;
        let text = render_search_observation(query, &results);
        Ok(Executed {
            content: vec![ContentPart::Text(wrap_response(&text))],
            observation: Observation::Text { text },
            failed: false,
        })
    }
}

use std::sync::Arc;

use image::DynamicImage;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::CurationError;
use crate::agent::{LoopConfig, Toolbox};
use crate::assets::{PinnedAsset, PROPOSER_FINAL_PROMPT, PROPOSER_QUERIES_PROMPT, PROPOSER_REGIONS_PROMPT};
use crate::chat::{single_turn, ImagePart, PolicyClient};
use crate::protocol::{
    Action, BoundingBox, ImageObservation, Observation, Termination, ToolInvocation, Trajectory, Turn,
};
use crate::tools::{crop_and_zoom, downsample_to_budget, encode_png, render_search_observation, search_web};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionProposal {
    pub bbox: BoundingBox,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryProposal {
    pub query: String,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalJudgement {
    pub reasoning: String,
    pub answer: String,
}

/// A model that proposes regions to inspect, search queries and a final
/// judgement for an image.
pub trait Proposer: Send + Sync {
    fn regions(&self, sample_id: &str, image: &ImagePart) -> Result<Vec<RegionProposal>, CurationError>;
    fn queries(&self, sample_id: &str, image: &ImagePart) -> Result<Vec<QueryProposal>, CurationError>;
    fn finalize(&self, sample_id: &str, image: &ImagePart, observations: &str) -> Result<FinalJudgement, CurationError>;
}

/// Proposer backed by a vision chat model and the pinned proposal prompts.
///
/// The three requests of a sample use the sample ids `"<id>#regions"`,
/// `"<id>#queries"` and `"<id>#final"`. Entries of a reply that do not have
/// the expected shape are skipped.
#[derive(Clone)]
pub struct ChatProposer {
    client: Arc<dyn PolicyClient>,
}

impl ChatProposer {
    pub fn new(client: Arc<dyn PolicyClient>) -> Self {
        Self { client }
    }

    fn ask(&self, id: String, asset: PinnedAsset, fill: &[(&str, String)], image: &ImagePart) -> Result<String, CurationError> {
        let mut prompt = asset.load().map_err(|e| CurationError::Proposer(e.to_string()))?.to_string();
        for (key, value) in fill {
            prompt = prompt.replace(key, value);
        }
        single_turn(self.client.as_ref(), &id, &prompt, Some(image)).map_err(|e| CurationError::Proposer(e.to_string()))
    }
}

/// The outermost JSON value delimited by `open`/`close` in a reply that may
/// wrap it in prose or code fences.
fn embedded_json(reply: &str, open: char, close: char) -> Result<Value, CurationError> {
    let start = reply.find(open);
    let end = reply.rfind(close);
    match (start, end) {
        (Some(s), Some(e)) if s < e => serde_json::from_str(&reply[s..=e])
            .map_err(|err| CurationError::Proposer(format!("bad JSON in proposer reply: {err}"))),
        _ => Err(CurationError::Proposer(format!("no JSON in proposer reply {reply:?}"))),
    }
}

fn rationale(item: &Value) -> String {
    item.get("rationale").and_then(Value::as_str).unwrap_or_default().trim().to_string()
}

fn parse_bbox(value: &Value) -> Option<BoundingBox> {
    let arr = value.as_array().filter(|a| a.len() == 4)?;
    let mut v = [0i64; 4];
    for (slot, n) in v.iter_mut().zip(arr) {
        *slot = n.as_i64().or_else(|| n.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64))?;
    }
    Some(BoundingBox::new(v[0], v[1], v[2], v[3]))
}

impl Proposer for ChatProposer {
    fn regions(&self, sample_id: &str, image: &ImagePart) -> Result<Vec<RegionProposal>, CurationError> {
        let fill = [("{width}", image.width.to_string()), ("{height}", image.height.to_string())];
        let reply = self.ask(format!("{sample_id}#regions"), PROPOSER_REGIONS_PROMPT, &fill, image)?;
        let items = embedded_json(&reply, '[', ']')?;
        Ok(items
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|item| {
                let bbox = parse_bbox(item.get("bbox_2d")?)?;
                Some(RegionProposal { bbox, rationale: rationale(item) })
            })
            .collect())
    }

    fn queries(&self, sample_id: &str, image: &ImagePart) -> Result<Vec<QueryProposal>, CurationError> {
        let reply = self.ask(format!("{sample_id}#queries"), PROPOSER_QUERIES_PROMPT, &[], image)?;
        let items = embedded_json(&reply, '[', ']')?;
        Ok(items
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|item| {
                let query = item.get("query")?.as_str()?.to_string();
                Some(QueryProposal { query, rationale: rationale(item) })
            })
            .collect())
    }

    fn finalize(&self, sample_id: &str, image: &ImagePart, observations: &str) -> Result<FinalJudgement, CurationError> {
        let fill = [("{observations}", observations.to_string())];
        let reply = self.ask(format!("{sample_id}#final"), PROPOSER_FINAL_PROMPT, &fill, image)?;
        serde_json::from_value(embedded_json(&reply, '{', '}')?)
            .map_err(|e| CurationError::Proposer(format!("bad final judgement: {e}")))
    }
}

/// A synthesized trajectory plus the proposals that were not used.
#[derive(Debug, Clone, PartialEq)]
pub struct CurationOutcome {
    pub trajectory: Trajectory,
    /// The budgeted input image as stored.
    pub input_image: ImageObservation,
    pub dropped: Vec<String>,
}

/// Builds a cold-start trajectory for one image.
///
/// Region proposals are executed first, then search queries, each through the
/// real tools; a proposal whose execution fails is dropped. At most
/// `turn_budget` proposals are kept. The proposer then writes the final
/// reasoning and answer from the collected observations.
pub fn propose_and_execute(
    sample_id: &str,
    image: Arc<DynamicImage>,
    proposer: &dyn Proposer,
    toolbox: &Toolbox,
    config: &LoopConfig,
    turn_budget: usize,
) -> Result<CurationOutcome, CurationError> {
    let entry_err = |message: String| CurationError::Entry { sample_id: sample_id.to_string(), message };
    if turn_budget == 0 {
        return Err(entry_err("turn budget must be at least 1".into()));
    }
    let base = downsample_to_budget(sample_id, image, config.pixel_budget).map_err(|e| entry_err(e.to_string()))?;
    let png = encode_png(&base.presented)?;
    let input_image = toolbox.store.put_png(&png, base.meta.width, base.meta.height)?;
    let part = ImagePart::from_png(&png, base.meta.width, base.meta.height);

    let mut traj = Trajectory::new(sample_id);
    let mut dropped = Vec::new();
    let mut notes = Vec::new();

    let regions = proposer.regions(sample_id, &part)?;
    for region in &regions {
        if traj.turns.len() >= turn_budget {
            dropped.push(format!("region {:?}: over turn budget", region.bbox));
            continue;
        }
        match crop_and_zoom(&base, region.bbox, &config.zoom()) {
            Ok(zoomed) => {
                let stored = toolbox.store.put(&zoomed.presented)?;
                let b = region.bbox;
                notes.push(format!("Region [{}, {}, {}, {}]: {}", b.x1, b.y1, b.x2, b.y2, region.rationale));
                traj.tool_call_stats.image_zoom_in_tool.record(false);
                traj.turns.push(tool_turn(&region.rationale, ToolInvocation::ZoomIn { bbox: b }, Observation::Image(stored)));
            }
            Err(e) => dropped.push(format!("region {:?}: {e}", region.bbox)),
        }
    }

    let queries = if traj.turns.len() < turn_budget { proposer.queries(sample_id, &part)? } else { Vec::new() };
    if regions.is_empty() && queries.is_empty() && traj.turns.len() < turn_budget {
        return Err(CurationError::EmptyProposal);
    }
    for q in &queries {
        if traj.turns.len() >= turn_budget {
            dropped.push(format!("query {:?}: over turn budget", q.query));
            continue;
        }
        let provider = match &toolbox.search {
            Some(p) if config.tool_set.search_web => p,
            _ => {
                dropped.push(format!("query {:?}: search disabled", q.query));
                continue;
            }
        };
        match search_web(provider.as_ref(), &q.query, config.search_limit) {
            Ok(results) => {
                let text = render_search_observation(&q.query, &results);
                notes.push(format!("Search ({}):\n{text}", q.rationale));
                traj.tool_call_stats.search_web.record(false);
                let call = ToolInvocation::SearchWeb { query: q.query.trim().to_string() };
                traj.turns.push(tool_turn(&q.rationale, call, Observation::Text { text }));
            }
            Err(e) => dropped.push(format!("query {:?}: {e}", q.query)),
        }
    }

    let judgement = proposer.finalize(sample_id, &part, &notes.join("\n\n"))?;
    let answer = judgement.answer.trim();
    if answer.is_empty() {
        return Err(CurationError::Proposer("final judgement has an empty answer".into()));
    }
    traj.turns.push(Turn {
        thought: Some(judgement.reasoning.trim().to_string()),
        action: Action::Answer { text: answer.to_string() },
        observation: None,
        forced: false,
        warnings: Vec::new(),
    });
    traj.final_answer = Some(answer.to_string());
    traj.termination = Termination::Answered;
    for d in &dropped {
        log::info!("{sample_id}: dropped {d}");
    }
    Ok(CurationOutcome { trajectory: traj, input_image, dropped })
}

fn tool_turn(rationale: &str, call: ToolInvocation, observation: Observation) -> Turn {
    Turn {
        thought: Some(rationale.to_string()).filter(|r| !r.is_empty()),
        action: Action::ToolCall { call },
        observation: Some(observation),
        forced: false,
        warnings: Vec::new(),
    }
}

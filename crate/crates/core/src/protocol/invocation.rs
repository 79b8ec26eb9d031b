use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use super::MalformedReason;

/// The two tools the policy may call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolName {
    ImageZoomInTool,
    SearchWeb,
}

impl ToolName {
    pub const ALL: [ToolName; 2] = [ToolName::ImageZoomInTool, ToolName::SearchWeb];

    pub fn as_str(self) -> &'static str {
        match self {
            ToolName::ImageZoomInTool => "image_zoom_in_tool",
            ToolName::SearchWeb => "search_web",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "image_zoom_in_tool" => Some(ToolName::ImageZoomInTool),
            "search_web" => Some(ToolName::SearchWeb),
            _ => None,
        }
    }
}

impl fmt::Display for ToolName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Pixel box `[x1, y1, x2, y2]` in the frame of the image shown to the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[i64; 4]", into = "[i64; 4]")]
pub struct BoundingBox {
    pub x1: i64,
    pub y1: i64,
    pub x2: i64,
    pub y2: i64,
}

impl BoundingBox {
    pub fn new(x1: i64, y1: i64, x2: i64, y2: i64) -> Self {
        Self { x1, y1, x2, y2 }
    }

    /// True when the corners are ordered (`x1 < x2` and `y1 < y2`).
    pub fn is_ordered(&self) -> bool {
        self.x1 < self.x2 && self.y1 < self.y2
    }
}

impl From<[i64; 4]> for BoundingBox {
    fn from([x1, y1, x2, y2]: [i64; 4]) -> Self {
        Self { x1, y1, x2, y2 }
    }
}

impl From<BoundingBox> for [i64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

/// A parsed, well-formed tool call.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ToolInvocation {
    ZoomIn { bbox: BoundingBox },
    SearchWeb { query: String },
}

impl ToolInvocation {
    pub fn zoom(x1: i64, y1: i64, x2: i64, y2: i64) -> Self {
        ToolInvocation::ZoomIn { bbox: BoundingBox::new(x1, y1, x2, y2) }
    }

    pub fn search(query: impl Into<String>) -> Self {
        ToolInvocation::SearchWeb { query: query.into() }
    }

    pub fn name(&self) -> ToolName {
        match self {
            ToolInvocation::ZoomIn { .. } => ToolName::ImageZoomInTool,
            ToolInvocation::SearchWeb { .. } => ToolName::SearchWeb,
        }
    }

    pub fn bbox(&self) -> Option<BoundingBox> {
        match self {
            ToolInvocation::ZoomIn { bbox } => Some(*bbox),
            ToolInvocation::SearchWeb { .. } => None,
        }
    }

    pub fn query(&self) -> Option<&str> {
        match self {
            ToolInvocation::ZoomIn { .. } => None,
            ToolInvocation::SearchWeb { query } => Some(query),
        }
    }

    fn wire(&self) -> WireCall<'_> {
        let arguments = match self {
            ToolInvocation::ZoomIn { bbox } => WireArgs::Zoom { bbox_2d: (*bbox).into() },
            ToolInvocation::SearchWeb { query } => WireArgs::Search { query },
        };
        WireCall { name: self.name().as_str(), arguments }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self.wire()).expect("in-memory serialization")
    }

    /// JSON body as written inside `<tool_call>` tags, e.g.
    /// `{"name": "search_web", "arguments": {"query": "The palace museum"}}`.
    pub fn to_json(&self) -> String {
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut out, SpacedFormatter);
        self.wire().serialize(&mut ser).expect("in-memory serialization");
        String::from_utf8(out).expect("serde_json emits utf-8")
    }

    /// Full `<tool_call>` block.
    pub fn to_tool_call_block(&self) -> String {
        format!("<tool_call>\n{}\n</tool_call>", self.to_json())
    }

    /// Validates a decoded tool-call object.
    pub fn from_value(value: &Value) -> Result<Self, (MalformedReason, Option<ToolName>, String)> {
        let bad = |tool, detail: &str| Err((MalformedReason::BadArguments, tool, detail.to_string()));
        let Some(obj) = value.as_object() else {
            return bad(None, "tool call is not a json object");
        };
        let Some(name) = obj.get("name").and_then(Value::as_str) else {
            return bad(None, "missing string field `name`");
        };
        let Some(tool) = ToolName::parse(name.trim()) else {
            return Err((MalformedReason::UnknownTool, None, format!("unknown tool `{name}`")));
        };
        let Some(args) = obj.get("arguments").and_then(Value::as_object) else {
            return bad(Some(tool), "missing object field `arguments`");
        };
        match tool {
            ToolName::ImageZoomInTool => {
                let bbox = only_key(args, "bbox_2d").ok_or_else(|| {
                    (MalformedReason::BadArguments, Some(tool), "expected exactly `bbox_2d`".into())
                })?;
                let coords = bbox
                    .as_array()
                    .filter(|a| a.len() == 4)
                    .and_then(|a| a.iter().map(as_integer).collect::<Option<Vec<i64>>>());
                match coords {
                    Some(c) => Ok(ToolInvocation::zoom(c[0], c[1], c[2], c[3])),
                    None => bad(Some(tool), "`bbox_2d` must be four integers"),
                }
            }
            ToolName::SearchWeb => {
                let query = only_key(args, "query").ok_or_else(|| {
                    (MalformedReason::BadArguments, Some(tool), "expected exactly `query`".into())
                })?;
                match query.as_str().map(str::trim) {
                    Some(q) if !q.is_empty() => Ok(ToolInvocation::search(q)),
                    _ => bad(Some(tool), "`query` must be a non-empty string"),
                }
            }
        }
    }
}

/// Field order `name`, `arguments`, as in the prompt examples.
#[derive(Serialize)]
struct WireCall<'a> {
    name: &'static str,
    arguments: WireArgs<'a>,
}

#[derive(Serialize)]
#[serde(untagged)]
enum WireArgs<'a> {
    Zoom { bbox_2d: [i64; 4] },
    Search { query: &'a str },
}

fn only_key<'a>(args: &'a Map<String, Value>, key: &str) -> Option<&'a Value> {
    if args.len() == 1 {
        args.get(key)
    } else {
        None
    }
}

fn as_integer(v: &Value) -> Option<i64> {
    if let Some(i) = v.as_i64() {
        return Some(i);
    }
    let f = v.as_f64()?;
    (f.fract() == 0.0 && f.abs() < 9.0e15).then_some(f as i64)
}

impl Serialize for ToolInvocation {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.wire().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ToolInvocation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        ToolInvocation::from_value(&value).map_err(|(_, _, detail)| D::Error::custom(detail))
    }
}

/// Compact JSON with a space after `:` and `,`, matching the style of the
/// tool-call examples shown to the model.
struct SpacedFormatter;

impl serde_json::ser::Formatter for SpacedFormatter {
    fn begin_array_value<W: ?Sized + std::io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        if first {
            Ok(())
        } else {
            writer.write_all(b", ")
        }
    }

    fn begin_object_key<W: ?Sized + std::io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        if first {
            Ok(())
        } else {
            writer.write_all(b", ")
        }
    }

    fn begin_object_value<W: ?Sized + std::io::Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        writer.write_all(b": ")
    }
}

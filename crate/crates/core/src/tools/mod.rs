//! Tool executors (crop-zoom, web search) and the geocoding client used by
//! evaluation. External services sit behind provider traits with live HTTP,
//! on-disk cache and fixture implementations.

mod geocode;
mod http;
mod image;
mod ratelimit;
mod search;
mod store;

use thiserror::Error;

pub use self::geocode::{
    FixtureGeocoder, GeocodeOutcome, GeocodeProvider, GeocodeResult, GeocodeStatus, Geocoder,
    HttpGeocoder,
};
pub use self::http::{HttpEndpoint, ProviderError};
pub(crate) use self::http::JsonClient as JsonClientHandle;
pub use self::image::{
    budget_dimensions, crop_and_zoom, downsample_to_budget, load_image, BudgetedImage, ImageError,
    ImageRef, ZoomConfig, DEFAULT_PIXEL_BUDGET, DEFAULT_ZOOM_TARGET, MIN_CROP_AREA,
};
pub use self::ratelimit::TokenBucket;
pub use self::search::{
    render_search_observation, search_web, CachedSearch, FixtureSearch, HttpSearch, SearchProvider,
    SearchResult, DEFAULT_SEARCH_LIMIT, SNIPPET_CHAR_LIMIT,
};
pub use self::store::{encode_png, ImageStore};

/// A tool call that could not be carried out. The message is shown to the
/// model as the observation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ToolFailure {
    #[error("invalid bbox")]
    InvalidBbox,
    #[error("empty after clamp")]
    EmptyAfterClamp,
    #[error("degenerate region")]
    DegenerateRegion,
    #[error("empty query")]
    EmptyQuery,
    #[error("search unavailable")]
    SearchUnavailable(String),
    #[error("tool disabled")]
    Disabled,
    #[error("image error: {0}")]
    Image(String),
}

impl ToolFailure {
    /// Observation text returned to the model.
    pub fn observation_text(&self, tool: &str) -> String {
        match self {
            ToolFailure::SearchUnavailable(detail) => {
                format!("Error from {tool}: search unavailable ({detail})")
            }
            other => format!("Error from {tool}: {other}"),
        }
    }
}

//! Agentic image geolocalization: the thought/action/observation loop with
//! crop-zoom and web-search tools, level-wise and distance-based evaluation,
//! hierarchical rewards with group-normalized advantages, and cold-start
//! trajectory curation.

pub mod advantage;
pub mod agent;
pub mod assets;
pub mod chat;
pub mod curation;
mod error;
pub mod eval;
pub mod geo;
pub mod label;
pub mod protocol;
pub mod reward;
pub mod scalar;
pub mod surrogate;
pub mod text;
pub mod tools;
pub mod verdict;

pub use advantage::group_advantages;
pub use error::GeoError;
pub use geo::{haversine_km, EARTH_RADIUS_KM, MAX_GREAT_CIRCLE_KM};
pub use label::{DataType, GeoLabel, Level, LevelAliases};
pub use reward::{hierarchical_reward, RewardRung};
pub use scalar::Real;
pub use surrogate::clipped_surrogate_term;
pub use verdict::{LevelVerdicts, VerdictMethod};

pub type GeoPoint = geo::GeoPoint<f64>;
pub type GeoPoint32 = geo::GeoPoint<f32>;
pub type HierarchicalReward = reward::HierarchicalReward<f64>;
pub type HierarchicalReward32 = reward::HierarchicalReward<f32>;
pub type RewardGroup = advantage::RewardGroup<f64>;
pub type RewardGroup32 = advantage::RewardGroup<f32>;
pub type SurrogateTermInput = surrogate::SurrogateTermInput<f64>;
pub type SurrogateTermInput32 = surrogate::SurrogateTermInput<f32>;

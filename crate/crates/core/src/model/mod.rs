//! Network definition and parameter handling.

pub mod config;
pub mod network;
pub mod params;
pub mod projection;

pub use config::{HeatmapLookup, ModelConfig};
pub use network::{
    softmax_keypoints, CloudGeometry, EncoderHierarchy, EncoderLevel, ForwardPass, Inference, KeyGrid,
    KeypointPrediction, Mode, SampleVars,
};
pub use params::{init_uniform, BufferId, NamedMatrix, ParamId, ParamStore};
pub use projection::{project_features, projection_stencil, COINCIDENT};

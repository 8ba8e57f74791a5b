//! Semantic-consistency metrics and the robustness protocol.

pub mod metrics;
pub mod report;
pub mod robustness;

pub use metrics::{das, das_all_pairs, miou, pair_consistency, DasReport, EvalRecord, Matching, PairScore, Reference, DEFAULT_THRESHOLD};
pub use report::render_table;
pub use robustness::{
    median, perturbed_keypoints, predict_records, reference_of, robustness_suite, Perturbation, RobustnessConfig,
    RobustnessReport, RobustnessRow,
};

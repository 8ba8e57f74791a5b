use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{segment_count, GridSpec, HeatmapParams};

/// How the decoder reads heatmap values at encoder coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatmapLookup {
    /// Trilinear interpolation of the precomputed lattice.
    Trilinear,
    /// Direct evaluation of the skeleton field at the query coordinates.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Points per input cloud.
    pub num_points: usize,
    pub keypoints: usize,
    /// Point counts of the set-abstraction levels 1..=L.
    pub level_sizes: Vec<usize>,
    /// Feature widths of the set-abstraction levels 1..=L.
    pub level_widths: Vec<usize>,
    /// Neighbours grouped around each sampled centroid.
    pub group_size: usize,
    /// Output widths of feature propagation onto levels 0..L-1.
    pub propagation_widths: Vec<usize>,
    /// Decoder layer widths, first entry for level L, last for level 0.
    pub decoder_widths: Vec<usize>,
    pub segment_hidden: usize,
    /// Neighbours used by feature projection between levels.
    pub neighbors: usize,
    pub grid_size: usize,
    pub heatmap: HeatmapParams,
    pub heatmap_lookup: HeatmapLookup,
    pub use_heatmap: bool,
    pub use_encoder_skip: bool,
    pub bn_momentum: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::rigid()
    }
}

impl ModelConfig {
    /// Defaults for rigid-object categories (10 keypoints).
    pub fn rigid() -> Self {
        Self {
            num_points: 2048,
            keypoints: 10,
            level_sizes: vec![512, 128, 32, 16],
            level_widths: vec![64, 128, 256, 512],
            group_size: 32,
            propagation_widths: vec![128, 128, 256, 256],
            decoder_widths: vec![256, 256, 128, 128, 128],
            segment_hidden: 128,
            neighbors: 3,
            grid_size: 16,
            heatmap: HeatmapParams::default(),
            heatmap_lookup: HeatmapLookup::Trilinear,
            use_heatmap: true,
            use_encoder_skip: true,
            bn_momentum: 0.1,
        }
    }

    /// Defaults for deformable garments (8 keypoints).
    pub fn clothes() -> Self {
        Self {
            keypoints: 8,
            ..Self::rigid()
        }
    }

    /// A scaled-down network for quick experiments and tests.
    pub fn small(num_points: usize, keypoints: usize) -> Self {
        let l1 = (num_points / 4).max(keypoints + 3);
        let l2 = (num_points / 16).max(keypoints + 2);
        let l3 = (num_points / 32).max(keypoints + 1);
        let l4 = (num_points / 64).max(keypoints);
        Self {
            num_points,
            keypoints,
            level_sizes: vec![l1, l2, l3, l4],
            level_widths: vec![32, 64, 96, 128],
            group_size: 16,
            propagation_widths: vec![64, 64, 96, 96],
            decoder_widths: vec![96, 96, 64, 64, 64],
            segment_hidden: 64,
            ..Self::rigid()
        }
    }

    pub fn depth(&self) -> usize {
        self.level_sizes.len()
    }

    pub fn segment_count(&self) -> usize {
        segment_count(self.keypoints)
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            m: self.grid_size,
            lo: [-0.5; 3],
            hi: [0.5; 3],
        }
    }

    /// Width of the encoder feature at level `i` (level 0 is the propagated
    /// full-resolution feature).
    pub fn encoder_width(&self, level: usize) -> usize {
        if level == 0 {
            self.propagation_widths[0]
        } else {
            self.level_widths[level - 1]
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        let l = self.depth();
        if self.keypoints < 2 {
            return bad(format!("need at least 2 keypoints, got {}", self.keypoints));
        }
        if l < 2 {
            return bad(format!("encoder needs at least 2 levels, got {l}"));
        }
        if self.level_widths.len() != l || self.propagation_widths.len() != l || self.decoder_widths.len() != l + 1 {
            return bad(format!(
                "layer lists disagree: {} sizes, {} widths, {} propagation, {} decoder (expected L, L, L, L+1)",
                l,
                self.level_widths.len(),
                self.propagation_widths.len(),
                self.decoder_widths.len()
            ));
        }
        let mut prev = self.num_points;
        for &n in &self.level_sizes {
            if n >= prev {
                return bad(format!("level sizes must strictly decrease from {}: {:?}", self.num_points, self.level_sizes));
            }
            prev = n;
        }
        if prev < self.keypoints {
            return bad(format!("coarsest level has {prev} points, fewer than {} keypoints", self.keypoints));
        }
        if self.neighbors == 0 || self.group_size == 0 {
            return bad("neighbour and group counts must be at least 1".into());
        }
        if self
            .level_widths
            .iter()
            .chain(&self.propagation_widths)
            .chain(&self.decoder_widths)
            .chain(std::iter::once(&self.segment_hidden))
            .any(|&w| w == 0)
        {
            return bad("layer widths must be positive".into());
        }
        if !(self.heatmap.sigma > 0.0) {
            return bad(format!("sigma must be positive, got {}", self.heatmap.sigma));
        }
        if !(0.0..=1.0).contains(&self.bn_momentum) {
            return bad(format!("batch-norm momentum {} outside [0, 1]", self.bn_momentum));
        }
        self.grid().validate()
    }
}

//! Flat `key = value` training configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{DatasetSource, DatasetSpec, SynthFamilyParams, SynthKind};
use crate::error::{Error, Result};
use crate::losses::LossConfig;
use crate::model::{HeatmapLookup, ModelConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Global gradient norm limit; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub dataset: DatasetSpec,
    pub model: ModelConfig,
    pub loss: LossConfig,
    pub output_dir: PathBuf,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 8,
            learning_rate: 1e-3,
            seed: 0,
            clip_norm: Some(10.0),
            dataset: DatasetSpec::default(),
            model: ModelConfig::rigid(),
            loss: LossConfig::for_keypoints(10),
            output_dir: PathBuf::from("runs/keygrid"),
        }
    }
}

/// Every key accepted by [`TrainConfig::parse`].
pub const CONFIG_KEYS: &[&str] = &[
    "epochs",
    "batch_size",
    "learning_rate",
    "seed",
    "clip_norm",
    "output_dir",
    "dataset.source",
    "dataset.root",
    "dataset.category",
    "dataset.points",
    "dataset.split",
    "dataset.split_seed",
    "synth.kind",
    "synth.frames",
    "synth.magnitude",
    "synth.seed",
    "model.preset",
    "model.keypoints",
    "model.level_sizes",
    "model.level_widths",
    "model.propagation_widths",
    "model.decoder_widths",
    "model.group_size",
    "model.segment_hidden",
    "model.neighbors",
    "model.grid_size",
    "model.sigma",
    "model.negate_exponent",
    "model.heatmap_lookup",
    "model.use_heatmap",
    "model.use_encoder_skip",
    "model.bn_momentum",
    "loss.alpha_sim",
    "loss.alpha_far",
    "loss.farthest_points",
    "loss.warmup_epochs",
];

struct Entries(BTreeMap<String, String>);

fn bad(key: &str, reason: impl Into<String>) -> Error {
    Error::BadConfigValue {
        key: key.to_string(),
        reason: reason.into(),
    }
}

impl Entries {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|_| bad(key, format!("cannot parse `{v}`"))))
            .transpose()
    }

    fn set<T: FromStr>(&self, key: &str, slot: &mut T) -> Result<()> {
        if let Some(v) = self.get(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|t| t.trim().parse::<T>().map_err(|_| bad(key, format!("cannot parse `{}`", t.trim()))))
                    .collect()
            })
            .transpose()
    }

    fn set_list<T: FromStr>(&self, key: &str, slot: &mut Vec<T>) -> Result<()> {
        if let Some(v) = self.list(key)? {
            *slot = v;
        }
        Ok(())
    }
}

impl TrainConfig {
    /// Parses config text. Blank lines and `#` comments are ignored;
    /// unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(line, format!("line {} is not `key = value`", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !CONFIG_KEYS.contains(&k) {
                return Err(Error::UnknownConfigKey(k.to_string()));
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(bad(k, "given more than once"));
            }
        }
        Self::from_entries(&Entries(map))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn from_entries(e: &Entries) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        e.set("epochs", &mut cfg.epochs)?;
        e.set("batch_size", &mut cfg.batch_size)?;
        e.set("learning_rate", &mut cfg.learning_rate)?;
        e.set("seed", &mut cfg.seed)?;
        if let Some(v) = e.raw("clip_norm") {
            cfg.clip_norm = if v == "none" { None } else { Some(e.get("clip_norm")?.expect("present")) };
        }
        if let Some(v) = e.raw("output_dir") {
            cfg.output_dir = PathBuf::from(v);
        }

        let mut synth = SynthFamilyParams::default();
        if let Some(v) = e.raw("synth.kind") {
            synth.kind = SynthKind::parse(v).ok_or_else(|| bad("synth.kind", format!("unknown family `{v}`")))?;
        }
        e.set("synth.frames", &mut synth.frames)?;
        e.set("synth.magnitude", &mut synth.magnitude)?;
        e.set("synth.seed", &mut synth.seed)?;
        let ds = &mut cfg.dataset;
        e.set("dataset.points", &mut ds.points)?;
        e.set("dataset.split_seed", &mut ds.split_seed)?;
        if let Some(v) = e.list::<f64>("dataset.split")? {
            ds.split = v.try_into().map_err(|_| bad("dataset.split", "expected three fractions"))?;
        }
        ds.source = match e.raw("dataset.source").unwrap_or("synthetic") {
            "synthetic" => DatasetSource::Synthetic(synth),
            "directory" => DatasetSource::Directory {
                root: PathBuf::from(e.raw("dataset.root").ok_or_else(|| bad("dataset.root", "required for a directory dataset"))?),
                category: e.raw("dataset.category").map(String::from),
            },
            other => return Err(bad("dataset.source", format!("expected `synthetic` or `directory`, got `{other}`"))),
        };
        let points = ds.points;

        let k = e.get::<usize>("model.keypoints")?;
        let mut m = match e.raw("model.preset").unwrap_or("rigid") {
            "rigid" => ModelConfig::rigid(),
            "clothes" => ModelConfig::clothes(),
            "small" => ModelConfig::small(points, k.unwrap_or(8)),
            other => return Err(bad("model.preset", format!("expected rigid, clothes or small, got `{other}`"))),
        };
        m.num_points = points;
        if let Some(k) = k {
            m.keypoints = k;
        }
        e.set_list("model.level_sizes", &mut m.level_sizes)?;
        e.set_list("model.level_widths", &mut m.level_widths)?;
        e.set_list("model.propagation_widths", &mut m.propagation_widths)?;
        e.set_list("model.decoder_widths", &mut m.decoder_widths)?;
        e.set("model.group_size", &mut m.group_size)?;
        e.set("model.segment_hidden", &mut m.segment_hidden)?;
        e.set("model.neighbors", &mut m.neighbors)?;
        e.set("model.grid_size", &mut m.grid_size)?;
        e.set("model.sigma", &mut m.heatmap.sigma)?;
        e.set("model.negate_exponent", &mut m.heatmap.negate_exponent)?;
        e.set("model.use_heatmap", &mut m.use_heatmap)?;
        e.set("model.use_encoder_skip", &mut m.use_encoder_skip)?;
        e.set("model.bn_momentum", &mut m.bn_momentum)?;
        if let Some(v) = e.raw("model.heatmap_lookup") {
            m.heatmap_lookup = match v {
                "trilinear" => HeatmapLookup::Trilinear,
                "exact" => HeatmapLookup::Exact,
                other => return Err(bad("model.heatmap_lookup", format!("expected trilinear or exact, got `{other}`"))),
            };
        }
        cfg.model = m;

        cfg.loss = LossConfig::for_keypoints(cfg.model.keypoints);
        e.set("loss.alpha_sim", &mut cfg.loss.alpha_sim)?;
        e.set("loss.alpha_far", &mut cfg.loss.alpha_far)?;
        e.set("loss.farthest_points", &mut cfg.loss.farthest_points)?;
        e.set("loss.warmup_epochs", &mut cfg.loss.warmup_epochs)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(bad("epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(bad("batch_size", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(bad("learning_rate", "must be positive"));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(bad("clip_norm", "must be positive"));
            }
        }
        if self.model.num_points != self.dataset.points {
            return Err(bad("dataset.points", "must match the model input size"));
        }
        self.dataset.validate()?;
        self.model.validate()?;
        self.loss.validate(self.model.num_points)
    }

    /// Replaces the seed with `value` when given (used for environment overrides).
    pub fn override_seed(&mut self, value: Option<&str>) -> Result<()> {
        if let Some(v) = value {
            self.seed = v.trim().parse().map_err(|_| bad("KEYGRID_SEED", format!("cannot parse `{v}`")))?;
        }
        Ok(())
    }
}

//! Keypoint stability under noise and downsampling.

use serde::{Deserialize, Serialize};

use super::metrics::{das_all_pairs, EvalRecord, Reference, DEFAULT_THRESHOLD};
use crate::data::Shape;
use crate::error::{Error, Result};
use crate::geometry::{add_gaussian_noise, dist, downsample, normalize_unit_cube, resample_to, Point3};
use crate::model::KeyGrid;

/// The reference a shape is scored against: its correspondence map when it
/// has one, otherwise its labels.
pub fn reference_of(shape: &Shape) -> Result<Reference> {
    if let Some(map) = &shape.correspondence {
        return Ok(Reference::Correspondence {
            points: shape.cloud.points().to_vec(),
            map: map.clone(),
        });
    }
    match &shape.labels {
        Some(l) => Ok(Reference::Labels(l.clone())),
        None => Err(Error::MissingAnnotations(format!("shape `{}` has no labels or correspondence", shape.cloud.id))),
    }
}

fn record(shape: &Shape, keypoints: Vec<Point3>) -> Result<EvalRecord> {
    Ok(EvalRecord {
        shape_id: shape.cloud.id.clone(),
        keypoints,
        reference: reference_of(shape)?,
    })
}

/// Evaluation-mode predictions for `shapes`, paired with their references.
pub fn predict_records(model: &KeyGrid, shapes: &[Shape]) -> Result<Vec<EvalRecord>> {
    shapes
        .iter()
        .map(|s| record(s, model.infer(&s.cloud)?.prediction.keypoints))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Perturbation {
    /// Gaussian noise with this standard deviation, in normalized units.
    Noise(f64),
    /// Keep one in this many points, then densify back to the model size.
    Downsample(usize),
}

impl Perturbation {
    pub fn is_null(self) -> bool {
        matches!(self, Self::Noise(s) if s == 0.0) || matches!(self, Self::Downsample(1))
    }

    pub fn label(self) -> String {
        match self {
            Self::Noise(s) => format!("noise {s}"),
            Self::Downsample(f) => format!("downsample {f}x"),
        }
    }
}

/// Keypoints of the perturbed shape, expressed in the clean shape's frame.
pub fn perturbed_keypoints(model: &KeyGrid, shape: &Shape, p: Perturbation, seed: u64) -> Result<Vec<Point3>> {
    if p.is_null() {
        return Ok(model.infer(&shape.cloud)?.prediction.keypoints);
    }
    let n = shape.cloud.len();
    let shape_mix = crate::losses::shape_seed(&shape.cloud.id, usize::MAX) as u64;
    let perturbed = match p {
        Perturbation::Noise(s) => add_gaussian_noise(&shape.cloud, s, seed.wrapping_mul(1_000_003) ^ shape_mix)?,
        Perturbation::Downsample(f) => {
            let start = (seed as usize).wrapping_mul(7919).wrapping_add(shape_mix as usize) % n;
            let small = downsample(&shape.cloud, f, Some(start))?;
            resample_to(&small.as_raw(), n)?
        }
    };
    let (normalized, transform) = normalize_unit_cube(&perturbed.as_raw())?;
    let kp = model.infer(&normalized)?.prediction.keypoints;
    Ok(transform.invert_all(&kp))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessConfig {
    pub noise_scales: Vec<f64>,
    pub downsample_factors: Vec<usize>,
    pub seeds: u64,
    pub radius: f64,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            noise_scales: vec![0.0, 0.01, 0.03, 0.06, 0.08],
            downsample_factors: vec![1, 8, 16],
            seeds: 5,
            radius: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub perturbation: Perturbation,
    /// Median over seeds.
    pub das: f64,
    /// Median over seeds of the mean keypoint displacement from the clean prediction.
    pub displacement: f64,
    pub das_per_seed: Vec<f64>,
    pub displacement_per_seed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub clean_das: f64,
    pub radius: f64,
    pub rows: Vec<RobustnessRow>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Recomputes DAS and keypoint displacement for every requested perturbation.
/// Null perturbations reproduce the clean predictions exactly.
pub fn robustness_suite(model: &KeyGrid, shapes: &[Shape], cfg: &RobustnessConfig) -> Result<RobustnessReport> {
    if let Some(s) = cfg.noise_scales.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::InvalidArgument(format!("noise scale must be nonnegative, got {s}")));
    }
    if cfg.downsample_factors.contains(&0) {
        return Err(Error::InvalidArgument("downsample factor must be at least 1".into()));
    }
    if cfg.seeds == 0 {
        return Err(Error::InvalidArgument("need at least one seed".into()));
    }
    let clean = predict_records(model, shapes)?;
    let clean_das = das_all_pairs(&clean, cfg.radius)?.score;
    let perturbations = cfg
        .noise_scales
        .iter()
        .map(|&s| Perturbation::Noise(s))
        .chain(cfg.downsample_factors.iter().map(|&f| Perturbation::Downsample(f)));
    let mut rows = Vec::new();
    for p in perturbations {
        let seeds = if p.is_null() { 1 } else { cfg.seeds };
        let mut das_per_seed = Vec::new();
        let mut displacement_per_seed = Vec::new();
        for seed in 0..seeds {
            let mut records = Vec::with_capacity(shapes.len());
            let (mut sum, mut count) = (0.0, 0usize);
            for (shape, base) in shapes.iter().zip(&clean) {
                let kp = perturbed_keypoints(model, shape, p, seed)?;
                for (a, b) in kp.iter().zip(&base.keypoints) {
                    sum += dist(*a, *b);
                    count += 1;
                }
                records.push(record(shape, kp)?);
            }
            das_per_seed.push(das_all_pairs(&records, cfg.radius)?.score);
            displacement_per_seed.push(sum / count as f64);
        }
        rows.push(RobustnessRow {
            perturbation: p,
            das: median(&das_per_seed),
            displacement: median(&displacement_per_seed),
            das_per_seed,
            displacement_per_seed,
        });
    }
    Ok(RobustnessReport {
        clean_das,
        radius: cfg.radius,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn null_perturbations() {
        assert!(Perturbation::Noise(0.0).is_null());
        assert!(Perturbation::Downsample(1).is_null());
        assert!(!Perturbation::Noise(0.01).is_null());
        let json = serde_json::to_string(&Perturbation::Downsample(8)).unwrap();
        assert_eq!(json, r#"{"kind":"downsample","value":8}"#);
    }
}

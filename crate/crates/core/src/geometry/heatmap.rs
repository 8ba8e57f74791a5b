//! The skeleton-distance grid heatmap.
//!
//! Every pair of keypoints spans a weighted skeleton segment. A query point
//! takes the maximum over segments of `w * exp(d^2 / sigma^2)` where `d` is
//! its distance to the segment. Evaluating that field on a uniform `M^3`
//! lattice gives the heatmap the decoder samples from.

use serde::{Deserialize, Serialize};

use super::cloud::{add, Point3};
use super::distance::{project_onto_segment, segment_dist_sq_grad};
use crate::error::{Error, Result};

/// Largest exponent accepted before the field is considered overflowing.
pub const EXPONENT_LIMIT: f64 = 80.0;

/// Query coordinates this close to a lattice index are snapped onto it.
const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Lattice points per edge.
    pub m: usize,
    pub lo: Point3,
    pub hi: Point3,
}

impl GridSpec {
    pub fn new(m: usize, lo: Point3, hi: Point3) -> Result<Self> {
        let spec = Self { m, lo, hi };
        spec.validate()?;
        Ok(spec)
    }

    /// `m` points per edge over the normalization cube `[-0.5, 0.5]^3`.
    pub fn unit_cube(m: usize) -> Result<Self> {
        Self::new(m, [-0.5; 3], [0.5; 3])
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::InvalidArgument(format!("grid needs at least 2 points per edge, got {}", self.m)));
        }
        if (0..3).any(|a| !(self.lo[a] < self.hi[a])) {
            return Err(Error::InvalidArgument("grid bounds must satisfy lo < hi on every axis".into()));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.m * self.m * self.m
    }

    /// Flat index of lattice node (x, y, z); z varies fastest.
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (x * self.m + y) * self.m + z
    }

    pub fn coordinate(&self, axis: usize, k: usize) -> f64 {
        self.lo[axis] + k as f64 * (self.hi[axis] - self.lo[axis]) / (self.m - 1) as f64
    }

    pub fn node(&self, x: usize, y: usize, z: usize) -> Point3 {
        [self.coordinate(0, x), self.coordinate(1, y), self.coordinate(2, z)]
    }

    /// All node coordinates in flat-index order.
    pub fn nodes(&self) -> Vec<Point3> {
        let mut out = Vec::with_capacity(self.node_count());
        for x in 0..self.m {
            for y in 0..self.m {
                for z in 0..self.m {
                    out.push(self.node(x, y, z));
                }
            }
        }
        out
    }

    /// The eight (node index, weight) pairs of the trilinear stencil at `q`.
    /// Queries outside the cube are clamped to the boundary cell.
    pub fn trilinear_stencil(&self, q: Point3) -> [(usize, f64); 8] {
        let top = (self.m - 1) as f64;
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let mut u = ((q[a] - self.lo[a]) / (self.hi[a] - self.lo[a]) * top).clamp(0.0, top);
            let r = u.round();
            if (u - r).abs() < SNAP {
                u = r;
            }
            let i = (u.floor() as usize).min(self.m - 2);
            base[a] = i;
            frac[a] = u - i as f64;
        }
        let mut out = [(0, 0.0); 8];
        let mut n = 0;
        for dx in 0..2 {
            let wx = if dx == 0 { 1.0 - frac[0] } else { frac[0] };
            for dy in 0..2 {
                let wy = if dy == 0 { 1.0 - frac[1] } else { frac[1] };
                for dz in 0..2 {
                    let wz = if dz == 0 { 1.0 - frac[2] } else { frac[2] };
                    out[n] = (self.index(base[0] + dx, base[1] + dy, base[2] + dz), wx * wy * wz);
                    n += 1;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkeletonSegment {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Number of skeleton segments for `k` keypoints.
pub fn segment_count(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

/// Keypoint pairs `(i, j)`, `i < j`, in the canonical order
/// (0,1), (0,2), ..., (0,K-1), (1,2), ...
pub fn segment_pairs(k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(segment_count(k));
    for i in 0..k {
        for j in i + 1..k {
            out.push((i, j));
        }
    }
    out
}

/// Pairs the canonical segment order with a weight vector.
pub fn segments_from_weights(k: usize, weights: &[f64]) -> Result<Vec<SkeletonSegment>> {
    if weights.len() != segment_count(k) {
        return Err(Error::ShapeMismatch(format!(
            "{} segment weights for {k} keypoints, expected {}",
            weights.len(),
            segment_count(k)
        )));
    }
    Ok(segment_pairs(k)
        .into_iter()
        .zip(weights)
        .map(|((i, j), &weight)| SkeletonSegment { i, j, weight })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapParams {
    pub sigma: f64,
    /// Use `exp(-d^2 / sigma^2)` instead of `exp(+d^2 / sigma^2)`.
    pub negate_exponent: bool,
}

impl Default for HeatmapParams {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            negate_exponent: false,
        }
    }
}

impl HeatmapParams {
    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }

    #[inline]
    fn exponent(&self, d_sq: f64) -> f64 {
        let e = d_sq / (self.sigma * self.sigma);
        if self.negate_exponent {
            -e
        } else {
            e
        }
    }
}

fn validate_skeleton(keypoints: &[Point3], segments: &[SkeletonSegment]) -> Result<()> {
    let k = keypoints.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 keypoints, got {k}")));
    }
    if segments.len() != segment_count(k) {
        return Err(Error::InvalidArgument(format!(
            "{} segments do not cover all {} keypoint pairs",
            segments.len(),
            segment_count(k)
        )));
    }
    let mut seen = vec![false; k * k];
    for s in segments {
        if !(s.i < s.j && s.j < k) {
            return Err(Error::InvalidArgument(format!("bad segment ({}, {})", s.i, s.j)));
        }
        if std::mem::replace(&mut seen[s.i * k + s.j], true) {
            return Err(Error::InvalidArgument(format!("duplicate segment ({}, {})", s.i, s.j)));
        }
        if !(s.weight >= 0.0) || !s.weight.is_finite() {
            return Err(Error::InvalidArgument(format!("segment weight {} is not a finite non-negative value", s.weight)));
        }
    }
    Ok(())
}

/// Winning segment at one query point.
#[derive(Debug, Clone, Copy)]
struct Winner {
    segment: usize,
    value: f64,
    dist_sq: f64,
}

fn evaluate_point(q: Point3, keypoints: &[Point3], segments: &[SkeletonSegment], params: &HeatmapParams) -> Result<Winner> {
    let mut best = Winner {
        segment: 0,
        value: f64::NEG_INFINITY,
        dist_sq: 0.0,
    };
    for (n, s) in segments.iter().enumerate() {
        let d_sq = project_onto_segment(q, keypoints[s.i], keypoints[s.j]).dist_sq;
        let e = params.exponent(d_sq);
        if e > EXPONENT_LIMIT {
            return Err(Error::SigmaTooSmall {
                exponent: e,
                limit: EXPONENT_LIMIT,
            });
        }
        let v = s.weight * e.exp();
        if v > best.value {
            best = Winner {
                segment: n,
                value: v,
                dist_sq: d_sq,
            };
        }
    }
    Ok(best)
}

/// Evaluates the skeleton field at arbitrary query points.
pub fn skeleton_field(
    keypoints: &[Point3],
    segments: &[SkeletonSegment],
    queries: &[Point3],
    params: &HeatmapParams,
) -> Result<Vec<f64>> {
    params.validate()?;
    validate_skeleton(keypoints, segments)?;
    queries
        .iter()
        .map(|&q| evaluate_point(q, keypoints, segments, params).map(|w| w.value))
        .collect()
}

/// Reverse pass of [`skeleton_field`]: given `dL/dvalue` per query, returns
/// `dL/dkeypoints` and `dL/dweight` per segment. Only the winning segment at
/// each query receives gradient.
pub fn skeleton_field_backward(
    keypoints: &[Point3],
    segments: &[SkeletonSegment],
    queries: &[Point3],
    params: &HeatmapParams,
    grad_out: &[f64],
) -> Result<(Vec<Point3>, Vec<f64>)> {
    params.validate()?;
    validate_skeleton(keypoints, segments)?;
    let mut grad_kp = vec![[0.0; 3]; keypoints.len()];
    let mut grad_w = vec![0.0; segments.len()];
    let inv_sigma_sq = 1.0 / (params.sigma * params.sigma);
    let sign = if params.negate_exponent { -1.0 } else { 1.0 };
    for (&q, &g) in queries.iter().zip(grad_out) {
        if g == 0.0 {
            continue;
        }
        let win = evaluate_point(q, keypoints, segments, params)?;
        let s = segments[win.segment];
        let e = params.exponent(win.dist_sq).exp();
        grad_w[win.segment] += g * e;
        let d_dsq = g * s.weight * e * sign * inv_sigma_sq;
        let (_, [_, gi, gj]) = segment_dist_sq_grad(q, keypoints[s.i], keypoints[s.j]);
        grad_kp[s.i] = add(grad_kp[s.i], gi.map(|v| v * d_dsq));
        grad_kp[s.j] = add(grad_kp[s.j], gj.map(|v| v * d_dsq));
    }
    Ok((grad_kp, grad_w))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridHeatmap {
    /// Node values in [`GridSpec::index`] order.
    pub values: Vec<f64>,
    pub spec: GridSpec,
    pub params: HeatmapParams,
}

impl GridHeatmap {
    pub fn value_at(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.spec.index(x, y, z)]
    }
}

pub fn build_heatmap(
    keypoints: &[Point3],
    segments: &[SkeletonSegment],
    spec: &GridSpec,
    params: &HeatmapParams,
) -> Result<GridHeatmap> {
    spec.validate()?;
    let values = skeleton_field(keypoints, segments, &spec.nodes(), params)?;
    Ok(GridHeatmap {
        values,
        spec: *spec,
        params: *params,
    })
}

/// Trilinear lookup into the heatmap lattice.
pub fn sample_heatmap(heatmap: &GridHeatmap, queries: &[Point3]) -> Vec<f64> {
    sample_grid(&heatmap.values, &heatmap.spec, queries)
}

pub fn sample_grid(values: &[f64], spec: &GridSpec, queries: &[Point3]) -> Vec<f64> {
    queries
        .iter()
        .map(|&q| spec.trilinear_stencil(q).iter().map(|&(i, w)| w * values[i]).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_segment() -> (Vec<Point3>, Vec<SkeletonSegment>) {
        (
            vec![[0.0; 3], [0.4, 0.0, 0.0]],
            vec![SkeletonSegment { i: 0, j: 1, weight: 1.0 }],
        )
    }

    #[test]
    fn on_skeleton_value_is_weight() {
        let (kp, seg) = one_segment();
        let v = skeleton_field(&kp, &seg, &[[0.2, 0.0, 0.0]], &HeatmapParams::default()).unwrap();
        assert_eq!(v[0], 1.0);
    }

    #[test]
    fn off_skeleton_value() {
        let (kp, seg) = one_segment();
        let v = skeleton_field(&kp, &seg, &[[0.2, 0.3, 0.0]], &HeatmapParams::default()).unwrap();
        assert!((v[0] - 0.09f64.exp()).abs() < 1e-12);
        assert!((v[0] - 1.0942).abs() < 1e-4);
        let neg = HeatmapParams {
            negate_exponent: true,
            ..Default::default()
        };
        let v = skeleton_field(&kp, &seg, &[[0.2, 0.3, 0.0]], &neg).unwrap();
        assert!((v[0] - (-0.09f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn validation_errors() {
        let (kp, seg) = one_segment();
        let spec = GridSpec::unit_cube(4).unwrap();
        let bad_sigma = HeatmapParams {
            sigma: 0.0,
            ..Default::default()
        };
        assert!(build_heatmap(&kp, &seg, &spec, &bad_sigma).is_err());
        let tiny = HeatmapParams {
            sigma: 0.05,
            ..Default::default()
        };
        assert!(matches!(
            build_heatmap(&kp, &seg, &spec, &tiny),
            Err(Error::SigmaTooSmall { .. })
        ));
        assert!(build_heatmap(&kp[..1], &[], &spec, &HeatmapParams::default()).is_err());
        let kp3 = vec![[0.0; 3], [0.1, 0.0, 0.0], [0.0, 0.1, 0.0]];
        assert!(build_heatmap(&kp3, &seg, &spec, &HeatmapParams::default()).is_err());
        assert!(GridSpec::unit_cube(1).is_err());
        assert!(GridSpec::new(4, [0.0; 3], [1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn grid_layout() {
        let spec = GridSpec::unit_cube(16).unwrap();
        assert_eq!(spec.node_count(), 4096);
        assert_eq!(spec.node(0, 0, 0), [-0.5; 3]);
        assert_eq!(spec.node(15, 15, 15), [0.5; 3]);
        let nodes = spec.nodes();
        assert_eq!(nodes[spec.index(3, 7, 11)], spec.node(3, 7, 11));
    }

    #[test]
    fn segment_enumeration() {
        assert_eq!(segment_count(10), 45);
        assert_eq!(segment_pairs(3), vec![(0, 1), (0, 2), (1, 2)]);
        assert!(segments_from_weights(3, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn sampling_identity_and_midpoint() {
        let spec = GridSpec::unit_cube(5).unwrap();
        let values: Vec<f64> = (0..spec.node_count()).map(|i| (i as f64 * 0.37).sin()).collect();
        let hm = GridHeatmap {
            values: values.clone(),
            spec,
            params: HeatmapParams::default(),
        };
        let nodes = spec.nodes();
        assert_eq!(sample_heatmap(&hm, &nodes), values);
        let a = spec.node(1, 2, 3);
        let b = spec.node(2, 2, 3);
        let mid = [(a[0] + b[0]) / 2.0, a[1], a[2]];
        let got = sample_heatmap(&hm, &[mid])[0];
        let want = (hm.value_at(1, 2, 3) + hm.value_at(2, 2, 3)) / 2.0;
        assert!((got - want).abs() < 1e-12);
        // clamped outside the cube
        let out = sample_heatmap(&hm, &[[-3.0, -3.0, -3.0], [9.0, 9.0, 9.0]]);
        assert_eq!(out, vec![hm.value_at(0, 0, 0), hm.value_at(4, 4, 4)]);
    }
}

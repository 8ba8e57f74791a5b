//! Reconstruction and keypoint-prior objectives and their schedule.

use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::geometry::{chamfer_distance, farthest_point_sampling, Point3, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub alpha_sim: f64,
    pub alpha_far: f64,
    /// Number of farthest points used as the keypoint prior.
    pub farthest_points: usize,
    /// Epochs `0..warmup_epochs` train without the similarity term.
    pub warmup_epochs: usize,
}

impl LossConfig {
    /// Defaults for `k` keypoints: 14 prior points for 10 keypoints, 12 for 8,
    /// `k + 4` otherwise.
    pub fn for_keypoints(k: usize) -> Self {
        Self {
            alpha_sim: 1.0,
            alpha_far: 1.0,
            farthest_points: match k {
                10 => 14,
                8 => 12,
                _ => k + 4,
            },
            warmup_epochs: 20,
        }
    }

    pub fn validate(&self, num_points: usize) -> Result<()> {
        if !(self.alpha_sim >= 0.0 && self.alpha_far >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "loss coefficients must be nonnegative, got {} and {}",
                self.alpha_sim, self.alpha_far
            )));
        }
        if self.farthest_points == 0 || self.farthest_points > num_points {
            return Err(Error::InvalidArgument(format!(
                "{} farthest points requested from {num_points}-point clouds",
                self.farthest_points
            )));
        }
        Ok(())
    }

    /// Coefficient applied to the similarity term at `epoch`.
    pub fn similarity_weight(&self, epoch: usize) -> f64 {
        if epoch < self.warmup_epochs {
            0.0
        } else {
            self.alpha_sim
        }
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        Self::for_keypoints(10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_sim: f64,
    pub l_far: f64,
    pub l_total: f64,
}

/// FPS start index for a shape: FNV-1a of its id, reduced modulo `n`.
pub fn shape_seed(id: &str, n: usize) -> usize {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    (h % n.max(1) as u64) as usize
}

pub fn similarity_loss(reconstruction: &[Point3], cloud: &PointCloud) -> Result<f64> {
    chamfer_distance(reconstruction, cloud.points())
}

/// The `j` farthest-point targets of `cloud`, starting from `seed`.
pub fn farthest_targets(cloud: &PointCloud, j: usize, seed: usize) -> Result<Vec<Point3>> {
    let idx = farthest_point_sampling(cloud.points(), j, seed)?;
    Ok(idx.into_iter().map(|i| cloud.points()[i]).collect())
}

pub fn farthest_point_loss(keypoints: &[Point3], cloud: &PointCloud, j: usize, seed: usize) -> Result<f64> {
    chamfer_distance(keypoints, &farthest_targets(cloud, j, seed)?)
}

fn combine(l_sim: f64, l_far: f64, epoch: usize, cfg: &LossConfig) -> f64 {
    let w = cfg.similarity_weight(epoch);
    let far = cfg.alpha_far * l_far;
    if w == 0.0 {
        far
    } else {
        far + w * l_sim
    }
}

/// Both components and the scheduled total. The prior targets are seeded by
/// the cloud id.
pub fn overall_loss(
    reconstruction: &[Point3],
    cloud: &PointCloud,
    keypoints: &[Point3],
    epoch: usize,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    let l_sim = similarity_loss(reconstruction, cloud)?;
    let l_far = farthest_point_loss(keypoints, cloud, cfg.farthest_points, shape_seed(&cloud.id, cloud.len()))?;
    Ok(LossBreakdown {
        l_sim,
        l_far,
        l_total: combine(l_sim, l_far, epoch, cfg),
    })
}

/// Graph handles of the loss components for one sample.
#[derive(Debug, Clone, Copy)]
pub struct LossVars {
    pub l_sim: Var,
    pub l_far: Var,
    pub total: Var,
}

/// Differentiable counterpart of [`overall_loss`]. `cloud` and `targets` are
/// fixed; gradients reach `reconstruction` and `keypoints`. Terms with a zero
/// coefficient are left out of `total` entirely.
pub fn loss_vars(
    g: &mut Graph,
    reconstruction: Var,
    keypoints: Var,
    cloud: &[Point3],
    targets: &[Point3],
    epoch: usize,
    cfg: &LossConfig,
) -> Result<LossVars> {
    let x = g.points(cloud);
    let q = g.points(targets);
    let l_sim = g.chamfer(reconstruction, x)?;
    let l_far = g.chamfer(keypoints, q)?;
    let far = g.scale(l_far, cfg.alpha_far);
    let w = cfg.similarity_weight(epoch);
    let total = if w == 0.0 {
        far
    } else {
        let sim = g.scale(l_sim, w);
        g.add(far, sim)
    };
    Ok(LossVars { l_sim, l_far, total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Frame;

    fn cloud(pts: Vec<Point3>) -> PointCloud {
        PointCloud::with_frame("s", pts, Frame::UnitCube).unwrap()
    }

    fn grid_cloud() -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..4 {
                    pts.push([i as f64 * 0.2 - 0.4, j as f64 * 0.2 - 0.4, k as f64 * 0.25 - 0.375]);
                }
            }
        }
        cloud(pts)
    }

    #[test]
    fn similarity_examples() {
        let c = cloud(vec![[0.0; 3], [0.1, 0.2, 0.3]]);
        assert_eq!(similarity_loss(c.points(), &c).unwrap(), 0.0);
        let one = cloud(vec![[0.0; 3]]);
        assert_eq!(similarity_loss(&[[1.0, 0.0, 0.0]], &one).unwrap(), 2.0);
    }

    #[test]
    fn prior_vanishes_on_its_own_targets() {
        let c = grid_cloud();
        let q = farthest_targets(&c, 12, 3).unwrap();
        assert_eq!(farthest_point_loss(&q, &c, 12, 3).unwrap(), 0.0);
    }

    #[test]
    fn collapse_costs_more_than_spread() {
        let c = grid_cloud();
        let q = farthest_targets(&c, 14, 0).unwrap();
        let centroid = c.centroid();
        let collapsed = vec![centroid; 10];
        let spread: Vec<Point3> = q[..10].to_vec();
        assert!(farthest_point_loss(&collapsed, &c, 14, 0).unwrap() > farthest_point_loss(&spread, &c, 14, 0).unwrap());
    }

    #[test]
    fn schedule_is_exclusive_at_warmup() {
        let c = grid_cloud();
        let recon: Vec<Point3> = c.points().iter().map(|p| [p[0] + 0.01, p[1], p[2]]).collect();
        let kp = vec![[0.1, 0.0, 0.0], [-0.2, 0.1, 0.0], [0.0, 0.0, 0.3]];
        let cfg = LossConfig::for_keypoints(8);
        let e0 = overall_loss(&recon, &c, &kp, 0, &cfg).unwrap();
        assert!(e0.l_sim > 0.0);
        assert_eq!(e0.l_total, cfg.alpha_far * e0.l_far);
        let e19 = overall_loss(&recon, &c, &kp, 19, &cfg).unwrap();
        assert_eq!(e19.l_total, e19.l_far);
        let e20 = overall_loss(&recon, &c, &kp, 20, &cfg).unwrap();
        assert_eq!(e20.l_total, e20.l_sim + e20.l_far);
        let no_sim = LossConfig { alpha_sim: 0.0, ..cfg };
        let late = overall_loss(&recon, &c, &kp, 50, &no_sim).unwrap();
        assert_eq!(late.l_total, late.l_far);
    }

    #[test]
    fn graph_loss_matches_plain_loss() {
        let c = grid_cloud();
        let recon: Vec<Point3> = c.points().iter().map(|p| [p[0], p[1] * 0.9, p[2]]).collect();
        let kp = vec![[0.1, 0.0, 0.0], [-0.2, 0.1, 0.0], [0.0, 0.0, 0.3], [0.3, 0.3, 0.3]];
        let cfg = LossConfig::for_keypoints(4);
        let seed = shape_seed(&c.id, c.len());
        let targets = farthest_targets(&c, cfg.farthest_points, seed).unwrap();
        for epoch in [0, 25] {
            let plain = overall_loss(&recon, &c, &kp, epoch, &cfg).unwrap();
            let mut g = Graph::new();
            let r = g.points(&recon);
            let k = g.leaf(crate::autograd::points_to_matrix(&kp));
            let v = loss_vars(&mut g, r, k, c.points(), &targets, epoch, &cfg).unwrap();
            assert_eq!(g.scalar(v.total), plain.l_total);
            assert_eq!(g.scalar(v.l_sim), plain.l_sim);
        }
    }

    #[test]
    fn shape_seed_is_stable() {
        assert_eq!(shape_seed("a", 100), shape_seed("a", 100));
        assert!(shape_seed("frame_07", 64) < 64);
        assert_eq!(shape_seed("", 7), (0xcbf2_9ce4_8422_2325u64 % 7) as usize);
    }

    #[test]
    fn config_validation() {
        assert_eq!(LossConfig::for_keypoints(10).farthest_points, 14);
        assert_eq!(LossConfig::for_keypoints(8).farthest_points, 12);
        assert!(LossConfig { alpha_far: -1.0, ..Default::default() }.validate(100).is_err());
        assert!(LossConfig::default().validate(10).is_err());
        assert!(LossConfig::default().validate(2048).is_ok());
    }
}

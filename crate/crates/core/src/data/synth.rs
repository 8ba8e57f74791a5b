//! Parametric deformation sequences with known correspondences.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// A rectangular sheet folded about a crease parallel to the y axis.
    FoldedSheet,
    /// Two cylinders joined by a hinge; the second swings about z.
    ArticulatedPair,
    /// A cylinder bent into a circular arc.
    BentTube,
}

impl SynthKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::FoldedSheet => "folded_sheet",
            Self::ArticulatedPair => "articulated_pair",
            Self::BentTube => "bent_tube",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::FoldedSheet, Self::ArticulatedPair, Self::BentTube]
            .into_iter()
            .find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthFamilyParams {
    pub kind: SynthKind,
    pub frames: usize,
    /// Fraction of the full deformation reached by the last frame.
    pub magnitude: f64,
    pub points: usize,
    pub seed: u64,
}

impl Default for SynthFamilyParams {
    fn default() -> Self {
        Self {
            kind: SynthKind::FoldedSheet,
            frames: 32,
            magnitude: 1.0,
            points: 2048,
            seed: 0,
        }
    }
}

impl SynthFamilyParams {
    pub fn validate(&self) -> Result<()> {
        if self.frames < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 frames, got {}", self.frames)));
        }
        if !(0.0..=1.0).contains(&self.magnitude) {
            return Err(Error::InvalidArgument(format!("magnitude {} outside [0, 1]", self.magnitude)));
        }
        if self.points == 0 {
            return Err(Error::InvalidArgument("points must be at least 1".into()));
        }
        Ok(())
    }

    /// Deformation parameter of frame `f`, from 0 at rest to `magnitude`.
    pub fn progress(&self, f: usize) -> f64 {
        self.magnitude * f as f64 / (self.frames - 1) as f64
    }
}

/// Sheet half-extents and crease position.
pub const SHEET_X: f64 = 1.0;
pub const SHEET_Y: f64 = 0.6;
pub const CREASE_X: f64 = 0.25;
const ROD_RADIUS: f64 = 0.15;
const TUBE_RADIUS: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct DeformationFrame {
    pub cloud: PointCloud,
    /// `correspondence[i]` is the frame-0 index of point `i`.
    pub correspondence: Vec<usize>,
}

fn fold(p: Point3, theta: f64) -> Point3 {
    if p[0] <= CREASE_X {
        return p;
    }
    let u = p[0] - CREASE_X;
    [CREASE_X + u * theta.cos(), p[1], p[2] + u * theta.sin()]
}

fn swing(p: Point3, beta: f64) -> Point3 {
    if p[0] <= 0.0 {
        return p;
    }
    let (s, c) = beta.sin_cos();
    [p[0] * c - p[1] * s, p[0] * s + p[1] * c, p[2]]
}

fn bend(p: Point3, phi: f64) -> Point3 {
    if phi.abs() < 1e-12 {
        return p;
    }
    let r = 2.0 / phi;
    let a = p[0] / r;
    let (s, c) = a.sin_cos();
    [r * s - p[1] * s, r * (1.0 - c) + p[1] * c, p[2]]
}

fn rest_shape(params: &SynthFamilyParams) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    (0..params.points)
        .map(|_| match params.kind {
            SynthKind::FoldedSheet => [
                rng.random_range(-SHEET_X..=SHEET_X),
                rng.random_range(-SHEET_Y..=SHEET_Y),
                0.0,
            ],
            SynthKind::ArticulatedPair => {
                let x = rng.random_range(-1.0..=1.0);
                let a = rng.random_range(0.0..TAU);
                [x, ROD_RADIUS * a.cos(), ROD_RADIUS * a.sin()]
            }
            SynthKind::BentTube => {
                let x = rng.random_range(-1.0..=1.0);
                let a = rng.random_range(0.0..TAU);
                [x, TUBE_RADIUS * a.cos(), TUBE_RADIUS * a.sin()]
            }
        })
        .collect()
}

/// Frame 0 is the rest shape; every frame keeps the point order, so the
/// correspondence is the identity on indices.
pub fn synth_family(params: &SynthFamilyParams) -> Result<Vec<DeformationFrame>> {
    params.validate()?;
    let rest = rest_shape(params);
    (0..params.frames)
        .map(|f| {
            let t = params.progress(f);
            let pts = rest
                .iter()
                .map(|&p| match params.kind {
                    SynthKind::FoldedSheet => fold(p, t * PI),
                    SynthKind::ArticulatedPair => swing(p, t * FRAC_PI_2),
                    SynthKind::BentTube => bend(p, t * PI),
                })
                .collect();
            Ok(DeformationFrame {
                cloud: PointCloud::new(format!("{}_{f:03}", params.kind.name()), pts)?,
                correspondence: (0..params.points).collect(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::normalize_unit_cube;

    fn params(kind: SynthKind, magnitude: f64) -> SynthFamilyParams {
        SynthFamilyParams {
            kind,
            frames: 5,
            magnitude,
            points: 300,
            seed: 3,
        }
    }

    #[test]
    fn zero_magnitude_freezes_every_kind() {
        for kind in [SynthKind::FoldedSheet, SynthKind::ArticulatedPair, SynthKind::BentTube] {
            let fam = synth_family(&params(kind, 0.0)).unwrap();
            assert_eq!(fam.len(), 5);
            for f in &fam {
                assert_eq!(f.cloud.points(), fam[0].cloud.points());
                assert_eq!(f.correspondence, (0..300).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn full_fold_reflects_through_crease_plane() {
        let fam = synth_family(&params(SynthKind::FoldedSheet, 1.0)).unwrap();
        let rest = fam[0].cloud.points();
        let last = fam[4].cloud.points();
        for (p, q) in rest.iter().zip(last) {
            let expect = if p[0] > CREASE_X { [2.0 * CREASE_X - p[0], p[1], 0.0] } else { *p };
            for k in 0..3 {
                assert!((q[k] - expect[k]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn bending_preserves_centerline_length() {
        let fam = synth_family(&params(SynthKind::BentTube, 1.0)).unwrap();
        let p = bend([1.0, 0.0, 0.0], PI);
        assert!((p[0] - 2.0 / PI).abs() < 1e-12 && (p[1] - 2.0 / PI).abs() < 1e-12);
        assert!(fam.iter().all(|f| normalize_unit_cube(&f.cloud).is_ok()));
    }

    #[test]
    fn validation_and_names() {
        assert!(synth_family(&SynthFamilyParams { frames: 1, ..Default::default() }).is_err());
        assert!(synth_family(&SynthFamilyParams { magnitude: 1.5, ..Default::default() }).is_err());
        assert_eq!(SynthKind::parse("bent_tube"), Some(SynthKind::BentTube));
        assert_eq!(SynthKind::parse("cube"), None);
    }
}

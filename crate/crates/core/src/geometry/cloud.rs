//! Point clouds and the unit-cube normalization shared by clouds and the grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

#[inline]
pub fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Point3, b: Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Point3, s: f64) -> Point3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm_sq(a: Point3) -> f64 {
    dot(a, a)
}

#[inline]
pub fn dist_sq(a: Point3, b: Point3) -> f64 {
    norm_sq(sub(a, b))
}

#[inline]
pub fn dist(a: Point3, b: Point3) -> f64 {
    dist_sq(a, b).sqrt()
}

/// Coordinate frame a cloud lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Raw,
    UnitCube,
}

impl Frame {
    pub fn name(self) -> &'static str {
        match self {
            Frame::Raw => "raw",
            Frame::UnitCube => "unit_cube",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
    pub id: String,
    frame: Frame,
}

impl PointCloud {
    /// Builds a raw-frame cloud. Rejects empty input and non-finite coordinates.
    pub fn new(id: impl Into<String>, points: Vec<Point3>) -> Result<Self> {
        Self::with_frame(id, points, Frame::Raw)
    }

    pub fn with_frame(id: impl Into<String>, points: Vec<Point3>, frame: Frame) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        for (i, p) in points.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::NonFinite(i));
            }
            if frame == Frame::UnitCube && p.iter().any(|c| c.abs() > 0.5) {
                return Err(Error::OutsideUnitCube { index: i, coord: *p });
            }
        }
        Ok(Self {
            points,
            id: id.into(),
            frame,
        })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn centroid(&self) -> Point3 {
        centroid(&self.points)
    }

    /// Axis-aligned bounding box as (min, max).
    pub fn bounds(&self) -> (Point3, Point3) {
        bounds(&self.points)
    }

    /// Same points, reinterpreted as raw coordinates.
    pub fn as_raw(&self) -> PointCloud {
        PointCloud {
            points: self.points.clone(),
            id: self.id.clone(),
            frame: Frame::Raw,
        }
    }

    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            id: self.id.clone(),
            frame: self.frame,
        }
    }

    pub fn ensure_frame(&self, frame: Frame) -> Result<()> {
        if self.frame == frame {
            Ok(())
        } else {
            Err(Error::WrongFrame {
                expected: frame.name(),
            })
        }
    }
}

pub fn centroid(points: &[Point3]) -> Point3 {
    let mut c = [0.0; 3];
    for p in points {
        c = add(c, *p);
    }
    scale(c, 1.0 / points.len() as f64)
}

pub fn bounds(points: &[Point3]) -> (Point3, Point3) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (lo, hi)
}

/// `unit = (raw + offset) * scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizeTransform {
    pub offset: Point3,
    pub scale: f64,
}

impl NormalizeTransform {
    pub fn identity() -> Self {
        Self {
            offset: [0.0; 3],
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: Point3) -> Point3 {
        scale(add(p, self.offset), self.scale)
    }

    pub fn invert(&self, q: Point3) -> Point3 {
        sub(scale(q, 1.0 / self.scale), self.offset)
    }

    pub fn apply_all(&self, points: &[Point3]) -> Vec<Point3> {
        points.iter().map(|&p| self.apply(p)).collect()
    }

    pub fn invert_all(&self, points: &[Point3]) -> Vec<Point3> {
        points.iter().map(|&q| self.invert(q)).collect()
    }
}

/// Centers the cloud on its centroid and scales isotropically so that the
/// largest centroid-relative deviation along any axis maps to 0.5.
pub fn normalize_unit_cube(cloud: &PointCloud) -> Result<(PointCloud, NormalizeTransform)> {
    cloud.ensure_frame(Frame::Raw)?;
    let c = cloud.centroid();
    let max_dev = cloud
        .points
        .iter()
        .flat_map(|p| (0..3).map(move |a| (p[a] - c[a]).abs()))
        .fold(0.0f64, f64::max);
    if max_dev <= f64::EPSILON * (1.0 + norm_sq(c).sqrt()) {
        return Err(Error::ZeroExtent);
    }
    let transform = NormalizeTransform {
        offset: scale(c, -1.0),
        scale: 0.5 / max_dev,
    };
    // rounding can land one ulp past the face of the cube
    let points = cloud
        .points
        .iter()
        .map(|&p| transform.apply(p).map(|v| v.clamp(-0.5, 0.5)))
        .collect();
    let out = PointCloud {
        points,
        id: cloud.id.clone(),
        frame: Frame::UnitCube,
    };
    Ok((out, transform))
}

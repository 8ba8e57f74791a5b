//! Chamfer distance and point-to-segment distance, with their gradients.

use super::cloud::{add, dist_sq, dot, norm_sq, scale, sub, Point3};
use crate::error::{Error, Result};

/// Segments shorter than this fall back to point-to-endpoint distance.
pub const DEGENERATE_SEGMENT: f64 = 1e-8;

/// Symmetric Chamfer distance with squared nearest-neighbour distances and
/// per-cloud means: `mean_a min_b |a-b|^2 + mean_b min_a |a-b|^2`.
pub fn chamfer_distance(a: &[Point3], b: &[Point3]) -> Result<f64> {
    Ok(chamfer_with_grad(a, b)?.value)
}

#[derive(Debug, Clone)]
pub struct ChamferGrad {
    pub value: f64,
    pub grad_a: Vec<Point3>,
    pub grad_b: Vec<Point3>,
}

fn nearest_sq(points: &[Point3], q: Point3) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, &p) in points.iter().enumerate() {
        let d = dist_sq(p, q);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

pub fn chamfer_with_grad(a: &[Point3], b: &[Point3]) -> Result<ChamferGrad> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut grad_a = vec![[0.0; 3]; a.len()];
    let mut grad_b = vec![[0.0; 3]; b.len()];
    let inv_a = 1.0 / a.len() as f64;
    let inv_b = 1.0 / b.len() as f64;
    let mut sum_a = 0.0;
    for (i, &p) in a.iter().enumerate() {
        let (j, d) = nearest_sq(b, p);
        sum_a += d;
        let g = scale(sub(p, b[j]), 2.0 * inv_a);
        grad_a[i] = add(grad_a[i], g);
        grad_b[j] = sub(grad_b[j], g);
    }
    let mut sum_b = 0.0;
    for (j, &q) in b.iter().enumerate() {
        let (i, d) = nearest_sq(a, q);
        sum_b += d;
        let g = scale(sub(q, a[i]), 2.0 * inv_b);
        grad_b[j] = add(grad_b[j], g);
        grad_a[i] = sub(grad_a[i], g);
    }
    Ok(ChamferGrad {
        value: sum_a * inv_a + sum_b * inv_b,
        grad_a,
        grad_b,
    })
}

/// Which piece of the three-branch distance was active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentBranch {
    Start,
    Interior,
    End,
    Degenerate,
}

#[derive(Debug, Clone, Copy)]
pub struct SegmentProjection {
    /// Projection parameter along `start -> end` (0 for degenerate segments).
    pub t: f64,
    pub closest: Point3,
    pub dist_sq: f64,
    pub branch: SegmentBranch,
}

pub fn project_onto_segment(p: Point3, start: Point3, end: Point3) -> SegmentProjection {
    let axis = sub(end, start);
    let len_sq = norm_sq(axis);
    if len_sq.sqrt() < DEGENERATE_SEGMENT {
        return SegmentProjection {
            t: 0.0,
            closest: start,
            dist_sq: dist_sq(p, start),
            branch: SegmentBranch::Degenerate,
        };
    }
    let t = dot(sub(p, start), axis) / len_sq;
    let (closest, branch) = if t <= 0.0 {
        (start, SegmentBranch::Start)
    } else if t >= 1.0 {
        (end, SegmentBranch::End)
    } else {
        (add(scale(start, 1.0 - t), scale(end, t)), SegmentBranch::Interior)
    };
    SegmentProjection {
        t,
        closest,
        dist_sq: dist_sq(p, closest),
        branch,
    }
}

/// Euclidean distance from `p` to the segment `[start, end]`.
pub fn point_segment_distance(p: Point3, start: Point3, end: Point3) -> f64 {
    project_onto_segment(p, start, end).dist_sq.sqrt()
}

/// Gradients of the squared distance with respect to (p, start, end).
///
/// On the interior branch the closest point is stationary in `t`, so only the
/// explicit dependence through `(1-t) start + t end` contributes.
pub fn segment_dist_sq_grad(p: Point3, start: Point3, end: Point3) -> (f64, [Point3; 3]) {
    let proj = project_onto_segment(p, start, end);
    let r = sub(p, proj.closest);
    let gp = scale(r, 2.0);
    let grads = match proj.branch {
        SegmentBranch::Start | SegmentBranch::Degenerate => [gp, scale(r, -2.0), [0.0; 3]],
        SegmentBranch::End => [gp, [0.0; 3], scale(r, -2.0)],
        SegmentBranch::Interior => [gp, scale(r, -2.0 * (1.0 - proj.t)), scale(r, -2.0 * proj.t)],
    };
    (proj.dist_sq, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chamfer_examples() {
        assert_eq!(chamfer_distance(&[[0.0; 3]], &[[1.0, 0.0, 0.0]]).unwrap(), 2.0);
        let a = vec![[0.1, 0.2, 0.3], [0.4, -0.1, 0.0]];
        assert_eq!(chamfer_distance(&a, &a).unwrap(), 0.0);
        assert!(matches!(chamfer_distance(&[], &a), Err(Error::EmptyCloud)));
    }

    #[test]
    fn segment_examples() {
        let s = [0.0; 3];
        let e = [2.0, 0.0, 0.0];
        let at_start = project_onto_segment([0.0, 1.0, 0.0], s, e);
        assert_eq!(at_start.t, 0.0);
        assert_eq!(at_start.dist_sq.sqrt(), 1.0);
        let mid = project_onto_segment([1.0, 1.0, 0.0], s, e);
        assert_eq!(mid.t, 0.5);
        assert_eq!(mid.closest, [1.0, 0.0, 0.0]);
        assert_eq!(mid.dist_sq.sqrt(), 1.0);
        assert_eq!(point_segment_distance([5.0, 0.0, 0.0], s, e), 3.0);
    }

    #[test]
    fn degenerate_segment_falls_back() {
        let k = [0.3, 0.3, 0.3];
        let p = [0.3, 0.3, 1.3];
        let proj = project_onto_segment(p, k, k);
        assert_eq!(proj.branch, SegmentBranch::Degenerate);
        assert!((proj.dist_sq.sqrt() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chamfer_grad_matches_finite_differences() {
        let a = vec![[0.1, 0.2, 0.3], [0.4, -0.1, 0.0], [-0.3, 0.2, 0.1]];
        let b = vec![[0.0, 0.25, 0.3], [0.5, 0.0, 0.1]];
        let g = chamfer_with_grad(&a, &b).unwrap();
        let h = 1e-6;
        for i in 0..a.len() {
            for ax in 0..3 {
                let mut ap = a.clone();
                ap[i][ax] += h;
                let mut am = a.clone();
                am[i][ax] -= h;
                let fd = (chamfer_distance(&ap, &b).unwrap() - chamfer_distance(&am, &b).unwrap()) / (2.0 * h);
                assert!((fd - g.grad_a[i][ax]).abs() < 1e-6);
            }
        }
        for j in 0..b.len() {
            for ax in 0..3 {
                let mut bp = b.clone();
                bp[j][ax] += h;
                let mut bm = b.clone();
                bm[j][ax] -= h;
                let fd = (chamfer_distance(&a, &bp).unwrap() - chamfer_distance(&a, &bm).unwrap()) / (2.0 * h);
                assert!((fd - g.grad_b[j][ax]).abs() < 1e-6);
            }
        }
    }
}

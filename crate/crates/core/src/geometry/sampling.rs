//! Farthest point sampling, nearest neighbours, and the perturbations used by
//! the robustness protocol.

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::cloud::{dist_sq, scale, add, Frame, Point3, PointCloud};
use crate::error::{Error, Result};

/// Index of the lexicographically smallest point (lowest index on ties).
///
/// Used as the FPS seed whenever no explicit seed is supplied, which makes
/// sampling independent of the order points are stored in.
pub fn lexicographic_seed(points: &[Point3]) -> usize {
    let mut best = 0;
    for (i, p) in points.iter().enumerate().skip(1) {
        if lex_cmp(p, &points[best]) == Ordering::Less {
            best = i;
        }
    }
    best
}

fn lex_cmp(a: &Point3, b: &Point3) -> Ordering {
    a[0].total_cmp(&b[0])
        .then(a[1].total_cmp(&b[1]))
        .then(a[2].total_cmp(&b[2]))
}

/// Greedy farthest point sampling. The first index is `seed_index`; each
/// later pick maximizes the distance to the already-selected set, with ties
/// going to the lowest index.
pub fn farthest_point_sampling(points: &[Point3], count: usize, seed_index: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if count == 0 {
        return Err(Error::InvalidArgument("FPS count must be at least 1".into()));
    }
    if count > n {
        return Err(Error::TooManySamples {
            requested: count,
            available: n,
        });
    }
    if seed_index >= n {
        return Err(Error::InvalidArgument(format!(
            "seed index {seed_index} out of range for {n} points"
        )));
    }
    let mut selected = Vec::with_capacity(count);
    let mut taken = vec![false; n];
    let mut min_d: Vec<f64> = points.iter().map(|&p| dist_sq(p, points[seed_index])).collect();
    selected.push(seed_index);
    taken[seed_index] = true;
    while selected.len() < count {
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for i in 0..n {
            if !taken[i] && min_d[i] > best_d {
                best = i;
                best_d = min_d[i];
            }
        }
        selected.push(best);
        taken[best] = true;
        let q = points[best];
        for (d, &p) in min_d.iter_mut().zip(points) {
            let nd = dist_sq(p, q);
            if nd < *d {
                *d = nd;
            }
        }
    }
    Ok(selected)
}

/// The `k` nearest points to `query`, ordered by (distance, index).
pub fn k_nearest(points: &[Point3], query: Point3, k: usize) -> Vec<usize> {
    let k = k.min(points.len());
    let mut cand: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, &p)| (dist_sq(p, query), i)).collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k, cmp);
        cand.truncate(k);
    }
    cand.sort_unstable_by(cmp);
    cand.into_iter().map(|(_, i)| i).collect()
}

/// Index of the nearest point (lowest index on ties).
pub fn nearest(points: &[Point3], query: Point3) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &p) in points.iter().enumerate() {
        let d = dist_sq(p, query);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Perturbs every coordinate with independent N(0, scale²) noise.
pub fn add_gaussian_noise(cloud: &PointCloud, noise_scale: f64, seed: u64) -> Result<PointCloud> {
    if !(noise_scale >= 0.0) || !noise_scale.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise scale must be finite and non-negative, got {noise_scale}"
        )));
    }
    if noise_scale == 0.0 {
        return Ok(cloud.clone());
    }
    let normal = Normal::new(0.0, noise_scale).expect("validated scale");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = cloud
        .points()
        .iter()
        .map(|p| p.map(|c| c + normal.sample(&mut rng)))
        .collect();
    PointCloud::with_frame(cloud.id.clone(), points, Frame::Raw)
}

/// FPS subset of size `floor(N / factor)`. `factor == 1` returns the cloud
/// unchanged, in its original order.
pub fn downsample(cloud: &PointCloud, factor: usize, seed_index: Option<usize>) -> Result<PointCloud> {
    if factor == 0 {
        return Err(Error::InvalidArgument("downsample factor must be at least 1".into()));
    }
    if factor == 1 {
        return Ok(cloud.clone());
    }
    let target = cloud.len() / factor;
    if target == 0 {
        return Err(Error::InvalidArgument(format!(
            "factor {factor} leaves no points from a cloud of {}",
            cloud.len()
        )));
    }
    let seed = seed_index.unwrap_or_else(|| lexicographic_seed(cloud.points()));
    let idx = farthest_point_sampling(cloud.points(), target, seed)?;
    Ok(cloud.select(&idx))
}

/// Brings a cloud to exactly `n` points: FPS when there are too many, and
/// midpoint densification (each point paired with successively farther
/// neighbours) when there are too few. The result is raw-frame.
pub fn resample_to(cloud: &PointCloud, n: usize) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::InvalidArgument("target size must be at least 1".into()));
    }
    let pts = cloud.points();
    let out = match pts.len().cmp(&n) {
        Ordering::Equal => pts.to_vec(),
        Ordering::Greater => {
            let idx = farthest_point_sampling(pts, n, lexicographic_seed(pts))?;
            idx.into_iter().map(|i| pts[i]).collect()
        }
        Ordering::Less => densify(pts, n),
    };
    PointCloud::with_frame(cloud.id.clone(), out, Frame::Raw)
}

fn densify(pts: &[Point3], n: usize) -> Vec<Point3> {
    let m = pts.len();
    let mut out = pts.to_vec();
    if m == 1 {
        out.resize(n, pts[0]);
        return out;
    }
    let rounds = (n - m).div_ceil(m);
    let neighbours: Vec<Vec<usize>> = pts.iter().map(|&p| k_nearest(pts, p, rounds + 1)).collect();
    'outer: for r in 1..=rounds {
        for (i, nb) in neighbours.iter().enumerate() {
            if out.len() == n {
                break 'outer;
            }
            let j = nb[r.min(nb.len() - 1)];
            out.push(scale(add(pts[i], pts[j]), 0.5));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn line(n: usize) -> Vec<Point3> {
        (0..n).map(|i| [i as f64, 0.0, 0.0]).collect()
    }

    #[test]
    fn fps_collinear() {
        let pts = line(4);
        assert_eq!(farthest_point_sampling(&pts, 2, 0).unwrap(), vec![0, 3]);
        // points 1 and 2 both sit at distance 1 from the set {0, 3}
        assert_eq!(farthest_point_sampling(&pts, 3, 0).unwrap(), vec![0, 3, 1]);
    }

    #[test]
    fn fps_exhausts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Point3> = (0..9).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        for seed in 0..9 {
            let mut idx = farthest_point_sampling(&pts, 9, seed).unwrap();
            assert_eq!(idx[0], seed);
            idx.sort();
            assert_eq!(idx, (0..9).collect::<Vec<_>>());
        }
    }

    #[test]
    fn fps_rejects_oversampling() {
        assert!(matches!(
            farthest_point_sampling(&line(3), 4, 0),
            Err(Error::TooManySamples { .. })
        ));
    }

    #[test]
    fn knn_orders_by_distance_then_index() {
        let pts = vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.5, 0.0, 0.0], [3.0, 0.0, 0.0]];
        assert_eq!(k_nearest(&pts, [0.0; 3], 3), vec![2, 0, 1]);
        assert_eq!(nearest(&pts, [0.0; 3]), 2);
    }

    #[test]
    fn noise_zero_and_determinism() {
        let cloud = PointCloud::new("n", line(10)).unwrap();
        assert_eq!(add_gaussian_noise(&cloud, 0.0, 3).unwrap(), cloud);
        let a = add_gaussian_noise(&cloud, 0.06, 3).unwrap();
        let b = add_gaussian_noise(&cloud, 0.06, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, cloud);
        assert!(add_gaussian_noise(&cloud, -1.0, 3).is_err());
    }

    #[test]
    fn noise_statistics() {
        let pts = vec![[0.0; 3]; 100_000];
        let cloud = PointCloud::new("z", pts).unwrap();
        let noisy = add_gaussian_noise(&cloud, 0.06, 11).unwrap();
        for axis in 0..3 {
            let vals: Vec<f64> = noisy.points().iter().map(|p| p[axis]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
            let sd = var.sqrt();
            assert!((sd - 0.06).abs() / 0.06 < 0.02, "axis {axis}: sd {sd}");
        }
    }

    #[test]
    fn downsample_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Point3> = (0..2048).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        let cloud = PointCloud::new("d", pts).unwrap();
        assert_eq!(downsample(&cloud, 1, None).unwrap(), cloud);
        let small = downsample(&cloud, 16, None).unwrap();
        assert_eq!(small.len(), 128);
        for p in small.points() {
            assert!(cloud.points().contains(p));
        }
        let tiny = PointCloud::new("t", cloud.points()[..20].to_vec()).unwrap();
        let half = downsample(&tiny, 2, Some(4)).unwrap();
        let fps = farthest_point_sampling(tiny.points(), 10, 4).unwrap();
        assert_eq!(half, tiny.select(&fps));
        assert!(downsample(&tiny, 21, None).is_err());
    }

    #[test]
    fn resample_sizes() {
        let cloud = PointCloud::new("r", line(10)).unwrap();
        assert_eq!(resample_to(&cloud, 10).unwrap().points(), cloud.points());
        assert_eq!(resample_to(&cloud, 4).unwrap().len(), 4);
        let dense = resample_to(&cloud, 37).unwrap();
        assert_eq!(dense.len(), 37);
        assert_eq!(&dense.points()[..10], cloud.points());
        for p in &dense.points()[10..] {
            assert!(p[0] >= 0.0 && p[0] <= 9.0 && p[1] == 0.0);
        }
    }

    #[test]
    fn lexicographic_seed_is_order_free() {
        let pts = vec![[0.3, 0.0, 0.0], [0.1, 0.5, 0.0], [0.1, 0.2, 0.9]];
        assert_eq!(lexicographic_seed(&pts), 2);
    }
}

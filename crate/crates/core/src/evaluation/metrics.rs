//! Keypoint metrics: mIoU against labeled points and the dual alignment score.

use serde::{Deserialize, Serialize};

use crate::data::LabeledPoint;
use crate::error::{Error, Result};
use crate::geometry::{dist, nearest, Point3};

/// Default mIoU threshold and DAS radius, in normalized units.
pub const DEFAULT_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matching {
    /// Pairs taken in order of increasing distance.
    #[default]
    Greedy,
    /// Maximum number of pairs within the threshold.
    Optimal,
}

fn greedy_matches(pred: &[Point3], ann: &[Point3], threshold: f64) -> usize {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, &p) in pred.iter().enumerate() {
        for (j, &a) in ann.iter().enumerate() {
            let d = dist(p, a);
            if d <= threshold {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_p = vec![false; pred.len()];
    let mut used_a = vec![false; ann.len()];
    let mut tp = 0;
    for (_, i, j) in pairs {
        if !used_p[i] && !used_a[j] {
            used_p[i] = true;
            used_a[j] = true;
            tp += 1;
        }
    }
    tp
}

fn optimal_matches(pred: &[Point3], ann: &[Point3], threshold: f64) -> usize {
    let adj: Vec<Vec<usize>> = pred
        .iter()
        .map(|&p| (0..ann.len()).filter(|&j| dist(p, ann[j]) <= threshold).collect())
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; ann.len()];
    fn augment(i: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                if owner[j].is_none_or(|o| augment(o, adj, seen, owner)) {
                    owner[j] = Some(i);
                    return true;
                }
            }
        }
        false
    }
    (0..pred.len())
        .filter(|&i| augment(i, &adj, &mut vec![false; ann.len()], &mut owner))
        .count()
}

/// `100 * TP / (K + G - TP)`, where a predicted and an annotated point
/// match when their distance is at most `threshold`.
pub fn miou(predicted: &[Point3], annotated: &[Point3], threshold: f64, matching: Matching) -> Result<f64> {
    if annotated.is_empty() {
        return Err(Error::MissingAnnotations("no annotated keypoints".into()));
    }
    if predicted.is_empty() {
        return Err(Error::InvalidArgument("no predicted keypoints".into()));
    }
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be nonnegative, got {threshold}")));
    }
    let tp = match matching {
        Matching::Greedy => greedy_matches(predicted, annotated, threshold),
        Matching::Optimal => optimal_matches(predicted, annotated, threshold),
    };
    Ok(100.0 * tp as f64 / (predicted.len() + annotated.len() - tp) as f64)
}

/// What a prediction is judged against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    Labels(Vec<LabeledPoint>),
    /// The evaluated cloud and, per point, its index in a shared reference frame.
    Correspondence { points: Vec<Point3>, map: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub shape_id: String,
    pub keypoints: Vec<Point3>,
    pub reference: Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub a: String,
    pub b: String,
    pub consistent: usize,
    pub total: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DasReport {
    pub score: f64,
    pub radius: f64,
    pub pairs: Vec<PairScore>,
}

fn label_of(kp: Point3, labels: &[LabeledPoint], radius: f64) -> Option<u32> {
    labels
        .iter()
        .map(|l| (dist(kp, l.xyz), l.label))
        .filter(|(d, _)| *d <= radius)
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, l)| l)
}

/// Does keypoint `from` of one cloud, carried through the correspondence,
/// land within `radius` of `to` on the other cloud?
fn carried_within(from: Point3, src: (&[Point3], &[usize]), dst: (&[Point3], &[usize]), to: Point3, radius: f64) -> bool {
    let canonical = src.1[nearest(src.0, from)];
    dst.1
        .iter()
        .zip(dst.0)
        .filter(|(&c, _)| c == canonical)
        .any(|(_, &p)| dist(p, to) <= radius)
}

fn check_correspondence(r: &EvalRecord) -> Result<()> {
    if let Reference::Correspondence { points, map } = &r.reference {
        if points.is_empty() || points.len() != map.len() {
            return Err(Error::Unpaired(format!(
                "`{}` has {} points and {} correspondence entries",
                r.shape_id,
                points.len(),
                map.len()
            )));
        }
    }
    Ok(())
}

pub fn pair_consistency(a: &EvalRecord, b: &EvalRecord, radius: f64) -> Result<PairScore> {
    if a.keypoints.len() != b.keypoints.len() || a.keypoints.is_empty() {
        return Err(Error::Unpaired(format!(
            "`{}` has {} keypoints, `{}` has {}",
            a.shape_id,
            a.keypoints.len(),
            b.shape_id,
            b.keypoints.len()
        )));
    }
    check_correspondence(a)?;
    check_correspondence(b)?;
    let consistent = match (&a.reference, &b.reference) {
        (Reference::Labels(la), Reference::Labels(lb)) => a
            .keypoints
            .iter()
            .zip(&b.keypoints)
            .filter(|(&p, &q)| {
                let x = label_of(p, la, radius);
                x.is_some() && x == label_of(q, lb, radius)
            })
            .count(),
        (Reference::Correspondence { points: pa, map: ma }, Reference::Correspondence { points: pb, map: mb }) => a
            .keypoints
            .iter()
            .zip(&b.keypoints)
            .filter(|(&p, &q)| {
                carried_within(p, (pa, ma), (pb, mb), q, radius) && carried_within(q, (pb, mb), (pa, ma), p, radius)
            })
            .count(),
        _ => {
            return Err(Error::Unpaired(format!(
                "`{}` and `{}` carry different reference kinds",
                a.shape_id, b.shape_id
            )))
        }
    };
    let total = a.keypoints.len();
    Ok(PairScore {
        a: a.shape_id.clone(),
        b: b.shape_id.clone(),
        consistent,
        total,
        score: 100.0 * consistent as f64 / total as f64,
    })
}

/// Percentage of consistent keypoint indices over all given pairs.
pub fn das(pairs: &[(EvalRecord, EvalRecord)], radius: f64) -> Result<DasReport> {
    if pairs.is_empty() {
        return Err(Error::Unpaired("no record pairs".into()));
    }
    if !(radius >= 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be nonnegative, got {radius}")));
    }
    let scores = pairs
        .iter()
        .map(|(a, b)| pair_consistency(a, b, radius))
        .collect::<Result<Vec<_>>>()?;
    let consistent: usize = scores.iter().map(|s| s.consistent).sum();
    let total: usize = scores.iter().map(|s| s.total).sum();
    Ok(DasReport {
        score: 100.0 * consistent as f64 / total as f64,
        radius,
        pairs: scores,
    })
}

/// DAS over every unordered pair of `records`.
pub fn das_all_pairs(records: &[EvalRecord], radius: f64) -> Result<DasReport> {
    if records.len() < 2 {
        return Err(Error::NeedTwoFrames(records.len()));
    }
    let mut pairs = Vec::new();
    for i in 0..records.len() {
        for j in i + 1..records.len() {
            pairs.push((records[i].clone(), records[j].clone()));
        }
    }
    das(&pairs, radius)
}

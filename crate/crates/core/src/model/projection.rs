//! Inverse-squared-distance feature projection between point sets.

use crate::autograd::{apply_stencil, Matrix, Stencil};
use crate::error::{Error, Result};
use crate::geometry::{dist_sq, k_nearest, Point3};

/// Below this distance a target point is treated as coincident with an origin point.
pub const COINCIDENT: f64 = 1e-8;

/// For every target point, its `neighbors` nearest origin points with weights
/// `1/|x - x'|^2` normalized to sum to one. A coincident neighbour takes the
/// full weight.
pub fn projection_stencil(origin: &[Point3], target: &[Point3], neighbors: usize) -> Stencil {
    let k = neighbors.min(origin.len()).max(1);
    let mut index = Vec::with_capacity(target.len() * k);
    let mut weight = Vec::with_capacity(target.len() * k);
    for &x in target {
        let nb = k_nearest(origin, x, k);
        let d: Vec<f64> = nb.iter().map(|&i| dist_sq(origin[i], x)).collect();
        if let Some(hit) = d.iter().position(|&v| v.sqrt() < COINCIDENT) {
            for (j, &i) in nb.iter().enumerate() {
                index.push(i);
                weight.push(if j == hit { 1.0 } else { 0.0 });
            }
            continue;
        }
        let total: f64 = d.iter().map(|v| 1.0 / v).sum();
        for (&i, &v) in nb.iter().zip(&d) {
            index.push(i);
            weight.push((1.0 / v) / total);
        }
    }
    Stencil { width: k, index, weight }
}

/// Projects per-point `features` living on `origin` onto `target`.
pub fn project_features(features: &Matrix, origin: &[Point3], target: &[Point3], neighbors: usize) -> Result<Matrix> {
    if features.nrows() != origin.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows for {} origin points",
            features.nrows(),
            origin.len()
        )));
    }
    if neighbors == 0 || origin.len() < neighbors {
        return Err(Error::InvalidArgument(format!(
            "projection needs {neighbors} neighbours from {} origin points",
            origin.len()
        )));
    }
    Ok(apply_stencil(features, &projection_stencil(origin, target, neighbors)))
}

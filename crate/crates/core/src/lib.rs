//! Unsupervised 3D keypoint detection with skeleton-distance grid heatmaps.
//!
//! An encoder predicts keypoints as convex combinations of the input points.
//! Every keypoint pair spans a weighted skeleton segment, and the maximum
//! weighted exponential distance to those segments is evaluated on a dense
//! lattice (the grid heatmap). The decoder reconstructs the cloud from the
//! heatmap and the encoder's hierarchy, so the keypoints are shaped by a
//! reconstruction objective alone.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autograd;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod losses;
pub mod model;
pub mod training;

pub use error::{Error, Result};

//! Geometric primitives: clouds, sampling, distances and the grid heatmap.

mod cloud;
mod distance;
mod heatmap;
mod sampling;

pub use cloud::{
    add, bounds, centroid, dist, dist_sq, dot, norm_sq, normalize_unit_cube, scale, sub, Frame,
    NormalizeTransform, Point3, PointCloud,
};
pub use distance::{
    chamfer_distance, chamfer_with_grad, point_segment_distance, project_onto_segment,
    segment_dist_sq_grad, ChamferGrad, SegmentBranch, SegmentProjection, DEGENERATE_SEGMENT,
};
pub use heatmap::{
    build_heatmap, sample_grid, sample_heatmap, segment_count, segment_pairs, segments_from_weights,
    skeleton_field, skeleton_field_backward, GridHeatmap, GridSpec, HeatmapParams, SkeletonSegment,
    EXPONENT_LIMIT,
};
pub use sampling::{
    add_gaussian_noise, downsample, farthest_point_sampling, k_nearest, lexicographic_seed, nearest,
    resample_to,
};

//! Cloud and mesh ingestion, synthetic deformation families, and datasets.

pub mod dataset;
pub mod io;
pub mod mesh;
pub mod ply;
pub mod synth;

pub use dataset::{
    load_annotations, load_dataset, save_annotations, split_indices, Annotations, Dataset, DatasetSource,
    DatasetSpec, LabeledPoint, Shape, Split, ANNOTATION_FILE,
};
pub use io::{load_cloud, sidecar_path, write_cloud, CloudFormat};
pub use mesh::{load_mesh, sample_mesh, triangle_area, Mesh};
pub use ply::{read_ply, write_ply, PlyData, PlyEncoding};
pub use synth::{synth_family, DeformationFrame, SynthFamilyParams, SynthKind, CREASE_X, SHEET_X, SHEET_Y};

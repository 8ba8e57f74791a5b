use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty point cloud")]
    EmptyCloud,

    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),

    #[error("point {index} lies outside the unit cube: {coord:?}")]
    OutsideUnitCube { index: usize, coord: [f64; 3] },

    #[error("zero extent: all points are identical")]
    ZeroExtent,

    #[error("cloud is expected in the {expected} frame")]
    WrongFrame { expected: &'static str },

    #[error("requested {requested} samples from a cloud of {available} points")]
    TooManySamples { requested: usize, available: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("sigma too small for cube: exponent {exponent:.3} exceeds {limit}")]
    SigmaTooSmall { exponent: f64, limit: f64 },

    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("config error: unknown key `{0}`")]
    UnknownConfigKey(String),

    #[error("config error: bad value for `{key}`: {reason}")]
    BadConfigValue { key: String, reason: String },

    #[error("unsupported file format: {0}")]
    UnsupportedFormat(PathBuf),

    #[error("malformed record in {path} at line {line}: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("NaN coordinate in {0}")]
    NanCoordinate(PathBuf),

    #[error("degenerate mesh: total surface area is zero")]
    DegenerateMesh,

    #[error("dataset not found: {0}")]
    DatasetMissing(PathBuf),

    #[error("missing annotations: {0}")]
    MissingAnnotations(String),

    #[error("need at least 2 frames, got {0}")]
    NeedTwoFrames(usize),

    #[error("unpaired evaluation records: {0}")]
    Unpaired(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty point cloud: {context}")]
    EmptyCloud { context: &'static str },

    #[error("degenerate point configuration: {context}")]
    Degenerate { context: &'static str },

    #[error("no correspondences within {max_dist} m gate")]
    NoCorrespondences { max_dist: f64 },

    #[error("need at least {required} samples, got {actual}")]
    InsufficientSamples { required: usize, actual: usize },

    #[error("feature dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("histogram has zero mass")]
    ZeroMass,

    #[error("sequence too short: {frames} frames, interval {interval}")]
    IntervalTooLarge { frames: usize, interval: usize },

    #[error("layout rejected: {0:?}")]
    InvalidLayout(Vec<crate::layout::Violation>),

    #[error("object index {index} out of range ({count} objects)")]
    ObjectIndex { index: usize, count: usize },

    #[error("step {step} beyond horizon {horizon}")]
    StepOutOfRange { step: usize, horizon: usize },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("{path}: file size {size} B is not a multiple of record stride {stride} B")]
    MalformedSize {
        path: PathBuf,
        size: u64,
        stride: usize,
    },

    #[error("{path}: schema error at {pointer}: {message}")]
    Schema {
        path: PathBuf,
        pointer: String,
        message: String,
    },

    #[error("quaternion norm {norm} outside [0.99, 1.01] at record {index}")]
    BadQuaternion { norm: f64, index: usize },

    #[error("timestamps not strictly increasing at record {index}")]
    NonMonotonicTime { index: usize },

    #[error("registration failed at frame {frame}: {source}")]
    RegistrationAtFrame {
        frame: usize,
        source: Box<Error>,
    },

    #[error("dataset item {index}: {source}")]
    DatasetItem { index: usize, source: Box<Error> },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

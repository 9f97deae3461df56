use std::path::PathBuf;

use thiserror::Error;

/// Failures while reading or writing scene files.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("camera file {path}, line {line}: {message}")]
    CameraParse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("camera {index} ({name}): {message}")]
    InvalidCamera {
        index: usize,
        name: String,
        message: String,
    },
    #[error("malformed {format} header in {path}: {message}")]
    Header {
        format: &'static str,
        path: PathBuf,
        message: String,
    },
    #[error("{path}: dimensions {width}x{height} overflow or disagree with payload size")]
    Dimensions {
        path: PathBuf,
        width: usize,
        height: usize,
    },
    #[error("image {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("scene mismatch: {0}")]
    Mismatch(String),
}

impl IoError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Failures of the projective primitives.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point lies behind the camera (depth {0})")]
    BehindCamera(f64),
    #[error("plane passes through the reference camera centre; homography is degenerate")]
    DegenerateHomography,
    #[error("camera centres coincide; no epipolar geometry")]
    NoEpipolarGeometry,
    #[error("epipolar offset has no positive-depth solution")]
    NoSolution,
}

/// Failures of the region-plane fit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("region has {0} points, fewer than the 3 needed for a plane")]
    TooFewPoints(usize),
    #[error("all plane samples were collinear or degenerate")]
    Degenerate,
}

/// Failures of the synthetic-scene generator and evaluator.
#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unknown synthetic scene '{0}' (expected textured-plane, two-plane-L, textureless-wall or occlusion-box)")]
    UnknownScene(String),
    #[error("ground-truth cloud is empty")]
    EmptyGroundTruth,
    #[error("evaluation threshold must be positive, got {0}")]
    BadThreshold(f64),
}

/// Errors surfaced by the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("scene has {0} views; at least 2 are required")]
    TooFewViews(usize),
    #[error("view {view}: {message}")]
    InvalidView { view: usize, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

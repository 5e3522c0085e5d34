use std::path::PathBuf;

use crate::tensor::Shape;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch, expected {expected} but got {got}")]
    ShapeMismatch {
        op: &'static str,
        expected: Shape,
        got: Shape,
    },
    #[error("{op}: {reason}")]
    InvalidShape { op: &'static str, reason: String },
    #[error("backward requires a scalar loss, got shape {0}")]
    NotScalar(Shape),
    #[error("parameter {index} has no gradient")]
    MissingGradient { index: usize },
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("{path}: {reason}")]
    Image { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid image pair: {0}")]
    InvalidPair(String),
    #[error("invalid blur kernel: {0}")]
    InvalidKernel(String),
    #[error("config: {0}")]
    Config(String),
    #[error("degenerate tessellation: {0}")]
    DegenerateTessellation(String),
    #[error("thin-plate spline system is singular")]
    SingularSystem,
    #[error("patch sampling failed after {attempts} consecutive rejections: {reason}")]
    PatchRejected { attempts: usize, reason: String },
    #[error("patch footprint leaves the image domain")]
    FootprintOutOfBounds,
    #[error("invalid scale factor: {0}")]
    InvalidScale(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

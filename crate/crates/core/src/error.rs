use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {format} data: {msg}")]
    Parse { format: &'static str, msg: String },

    #[error("zero valid triangles")]
    NoTriangles,

    #[error("non-finite vertex coordinate at index {0}")]
    NonFinite(usize),

    #[error("zero-extent mesh (all vertices identical)")]
    ZeroExtent,

    #[error("zero-area mesh")]
    ZeroArea,

    #[error("empty point cloud")]
    EmptyCloud,

    #[error("resolution mismatch: {0} vs {1}")]
    ResolutionMismatch(usize, usize),

    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),

    #[error("exact assignment is limited to {cap} points, got {got}")]
    SizeCap { cap: usize, got: usize },

    #[error("empty output: the signed field never changes sign")]
    EmptyOutput,

    #[error("level set reaches the grid boundary (boundary value {0})")]
    NotInset(f64),

    #[error("zero reference volume")]
    ZeroReferenceVolume,

    #[error("box covers {0:.1}% of the surface area")]
    BoxCoversSurface(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("asset exceeded its {0:?} budget")]
    Budget(std::time::Duration),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("point is behind the camera (z = {0})")]
    BehindCamera(f64),

    #[error("insufficient overlap: {valid} valid residuals at the coarsest level")]
    InsufficientOverlap { valid: usize },

    #[error("degenerate correspondences: {0}")]
    DegenerateCorrespondences(String),

    #[error("insufficient landmarks: {shared} shared marker(s), need at least 2")]
    InsufficientLandmarks { shared: usize },

    #[error("marker {marker} corner {corner} has no valid depth in its 3x3 neighborhood")]
    InvalidCornerDepth { marker: i64, corner: usize },

    #[error("no correspondences within {max_dist} mm at the initial pose")]
    NoOverlap { max_dist: f64 },

    #[error("registration of frame {frame} failed: {source}")]
    Registration {
        frame: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("singular normal system; increase smoothness")]
    SingularSystem,

    #[error("alpha complex is empty (alpha = {0} mm)")]
    EmptyMesh(f64),

    #[error("region with label {0} is empty")]
    EmptyRegion(u32),

    #[error("the whole surface carries label {0}; region has no boundary")]
    WholeSurfaceLabeled(u32),

    #[error("rendered frame has no surface intersection")]
    EmptyFrame,

    #[error("unsupported oracle: {0}")]
    UnsupportedOracle(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Strips [`Error::Registration`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Registration { source, .. } => source.root(),
            other => other,
        }
    }
}

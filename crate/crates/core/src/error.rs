use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("footprints of participants {first} and {second} overlap")]
    OverlappingFootprints { first: u32, second: u32 },

    #[error("curvature {curvature} at {speed} m/s implies lateral acceleration {lateral} m/s^2 above the {limit} m/s^2 limit")]
    LateralLimit {
        curvature: f64,
        speed: f64,
        lateral: f64,
        limit: f64,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("training diverged at iteration {iteration}: loss {loss}")]
    Divergence { iteration: usize, loss: f64 },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("gave up after {0} rejected scene samples")]
    TooManyRejections(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: unsupported {kind} version {found} (expected {expected})")]
    UnknownVersion {
        path: PathBuf,
        kind: &'static str,
        found: u32,
        expected: u32,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for failures rooted in numerics rather than data or usage.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Divergence { .. } | Error::LateralLimit { .. })
    }
}

use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("protocol infeasible: {0}")]
    ProtocolInfeasible(String),
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("image decode failed: {0}")]
    Decode(String),
    #[error("sample ({x}, {y}) outside [0, {max_x}] x [0, {max_y}]")]
    OutOfBounds {
        x: f64,
        y: f64,
        max_x: f64,
        max_y: f64,
    },
    #[error("alignment failed: {0}")]
    Alignment(String),

    #[error("landmark count mismatch: {left} vs {right}")]
    CardinalityMismatch { left: usize, right: usize },
    #[error("triangulation failed: {0}")]
    Triangulation(String),
    #[error("singular affine system: source triangle is degenerate")]
    SingularSystem,

    #[error("backend error: {0}")]
    Backend(String),
    #[error("optimization aborted: {0}")]
    Optimization(String),
    #[error("image is {actual:?}, backend expects {expected:?}; resize first")]
    ResizeRequired {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("scoring protocol violated: {0}")]
    ScoringProtocol(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("report error: {0}")]
    Report(String),

    #[error("unknown color space `{0}`")]
    UnknownColorSpace(String),
    #[error("image too small: {0}")]
    TooSmall(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("model/config mismatch: {0}")]
    ConfigMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from invalid input rather than a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::MalformedManifest(_)
                | Error::Validation(_)
                | Error::ProtocolInfeasible(_)
                | Error::Precondition(_)
                | Error::UnsupportedFormat(_)
                | Error::CardinalityMismatch { .. }
                | Error::ResizeRequired { .. }
                | Error::ScoringProtocol(_)
                | Error::EmptyInput(_)
                | Error::UnknownColorSpace(_)
                | Error::TooSmall(_)
                | Error::ConfigMismatch(_)
                | Error::Json(_)
        )
    }
}

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("segment {segment}: {rule}")]
    Invariant { segment: i64, rule: String },

    #[error("invalid network: {0}")]
    Network(String),

    #[error("missing site '{0}'")]
    MissingSite(String),

    #[error("disconnected path: {0}")]
    DisconnectedPath(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("CFL violation: dt = {dt:.3e} s exceeds stable limit {limit:.3e} s in segment {segment}")]
    CflViolation { dt: f64, limit: f64, segment: i64 },

    #[error("solver blow-up in segment {segment}, cell {cell}: {reason}")]
    BlowUp {
        segment: i64,
        cell: usize,
        reason: String,
    },

    #[error("junction coupling at segment {segment} did not converge")]
    JunctionDiverged { segment: i64 },

    #[error("correlation matrix is not positive semidefinite (smallest eigenvalue {0:.3e})")]
    NotPositiveSemidefinite(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("constant feature '{0}' cannot be standardized")]
    ConstantFeature(String),

    #[error("feature mismatch: {0}")]
    FeatureMismatch(String),

    #[error("model is not fitted: {0}")]
    Unfitted(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invariant(segment: i64, rule: impl Into<String>) -> Self {
        Error::Invariant {
            segment,
            rule: rule.into(),
        }
    }

    /// Numerical failures (as opposed to bad input or configuration).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::CflViolation { .. } | Error::BlowUp { .. } | Error::JunctionDiverged { .. }
        )
    }
}

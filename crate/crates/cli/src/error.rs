use std::path::Path;

use hemoforge::Error as CoreError;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments, configuration or input files.
    Config,
    /// Solver, training or data-sufficiency failure.
    Numeric,
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Numeric,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::config(format!("{}: {e}", path.display()))
    }

    /// Prefixes the message with the pipeline stage.
    pub fn in_stage(self, stage: &str) -> Self {
        CliError {
            message: format!("stage {stage}: {}", self.message),
            ..self
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Numeric => 1,
            ErrorKind::Config => 2,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let numeric = e.is_numeric() || matches!(e, CoreError::InsufficientData(_));
        CliError {
            kind: if numeric { ErrorKind::Numeric } else { ErrorKind::Config },
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::config(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::config(e.to_string())
    }
}

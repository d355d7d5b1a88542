use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the simulator, the networks and the training loop.
#[derive(Debug, Error)]
pub enum CuraError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("invalid variant name `{0}`")]
    UnknownVariant(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("trace parse error on line {line}: {reason}")]
    Trace { line: usize, reason: String },

    #[error("training diverged at iteration {iteration}: {source}")]
    Diverged {
        iteration: usize,
        #[source]
        source: Box<CuraError>,
    },

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CuraError {
    pub fn non_finite(context: impl Into<String>) -> Self {
        CuraError::NonFinite {
            context: context.into(),
        }
    }

    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        CuraError::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CuraError::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used by the CLI for its one-line error output.
    pub fn kind(&self) -> &'static str {
        match self {
            CuraError::DimensionMismatch { .. } => "dimension_mismatch",
            CuraError::NonFinite { .. } => "non_finite",
            CuraError::EmptyInput(_) => "empty_input",
            CuraError::Config { .. } => "config",
            CuraError::UnknownVariant(_) => "unknown_variant",
            CuraError::Checkpoint(_) => "checkpoint",
            CuraError::Trace { .. } => "trace",
            CuraError::Diverged { .. } => "diverged",
            CuraError::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, CuraError>;

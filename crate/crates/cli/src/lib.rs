//! Command implementations behind the `gpm` binary.

pub mod commands;
pub mod files;
pub mod metrics;
pub mod render;

use std::path::{Path, PathBuf};

use gpm_core::GpmError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] GpmError),

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

    #[error("{0}")]
    Invalid(String),

    #[error("{0}")]
    Mismatch(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Stable category for the one-line error report.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => match e {
                GpmError::Hierarchy(_) | GpmError::NodeOutOfRange { .. } => "hierarchy",
                GpmError::TooLarge { .. } => "too-large",
                GpmError::NonMetric { .. } => "non-metric",
                GpmError::InvalidSlice(_) => "invalid-slice",
                GpmError::InvalidInstance(_) => "invalid-instance",
                GpmError::InvalidConfig { .. } => "invalid-config",
                GpmError::Monotonicity { .. } => "monotonicity",
                GpmError::Parse(_) => "parse",
                GpmError::Json(_) => "json",
                GpmError::Io(_) => "io",
            },
            CliError::Io { .. } => "io",
            CliError::Json { .. } => "json",
            CliError::Invalid(_) => "invalid",
            CliError::Mismatch(_) => "mismatch",
        }
    }

    /// `error: <kind>: <message>` on a single line.
    pub fn report(&self) -> String {
        let msg = self.to_string().replace('\n', " ");
        format!("error: {}: {msg}", self.kind())
    }
}

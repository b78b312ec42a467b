use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failure of a subcommand, carrying its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Config file does not match the schema, or a value is out of range.
    #[error("config error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("cannot access {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("malformed record {}: {message}", path.display())]
    Record { path: PathBuf, message: String },

    /// No peak, failed fit, or the brute-force check disagreed.
    #[error("analysis failed: {0}")]
    Analysis(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. } | CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Record { .. } => 4,
            CliError::Analysis(_) => 5,
        }
    }

    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Schema { path: path.into(), message: message.into() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// Core error raised while turning config values into a model.
    pub fn from_core(path: &str, e: hetsense::Error) -> Self {
        match e {
            hetsense::Error::Io(source) => CliError::Io { path: PathBuf::from(path), source },
            hetsense::Error::PeakNotFound(m) => CliError::Analysis(m),
            other => CliError::schema(path, other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

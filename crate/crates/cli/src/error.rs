//! CLI error type with machine-readable categories for exit reporting.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error(transparent)]
    Core(#[from] specmap_core::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        CliError::Parse { path: path.into(), line, msg: msg.into() }
    }

    /// One-word category printed on failure, stable for scripting.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Core(e) => match e {
                specmap_core::Error::InvalidInput(_) => "input",
                specmap_core::Error::IsolatedNode(_) => "input",
                specmap_core::Error::RankDeficient(_) => "degenerate",
                specmap_core::Error::NotSpd => "degenerate",
                specmap_core::Error::DegenerateEmbedding(_) => "degenerate",
                specmap_core::Error::MissingCaches => "state",
                specmap_core::Error::Diverged { .. } => "divergence",
                specmap_core::Error::Idx { .. } => "parse",
                specmap_core::Error::OracleCap { .. } => "input",
            },
        }
    }

    /// Process exit code for the category; zero is reserved for success.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "io" => 3,
            "parse" => 4,
            "input" => 5,
            "divergence" => 6,
            "degenerate" => 7,
            "state" => 8,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

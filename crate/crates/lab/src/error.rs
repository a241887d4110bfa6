use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error(transparent)]
    Core(#[from] fkpp_core::Error),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("cannot parse config: {0}")]
    ConfigSyntax(#[from] toml::de::Error),

    #[error("unknown preset `{0}` (available: light, heavy-alpha1, heavy-alpha2-3)")]
    UnknownPreset(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error("missing artifacts in {dir}: {}", missing.join(", "))]
    MissingArtifacts { dir: PathBuf, missing: Vec<String> },

    #[error("run aborted, partial outputs in {dir}: {reason}")]
    Aborted { dir: PathBuf, reason: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|source| LabError::Io {
            path: path.into(),
            source,
        })
    }
}

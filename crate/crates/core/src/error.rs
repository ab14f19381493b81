use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the reconstruction stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("codec error: {0}")]
    Codec(String),

    #[error("mask coverage unreachable after {attempts} attempts")]
    CoverageUnreachable { attempts: usize },

    #[error("conjugate gradient did not converge: residual {residual:e} after {iterations} iterations")]
    NotConverged { residual: f64, iterations: usize },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("resolution mismatch: model expects {expected}, input is {actual}")]
    ResolutionMismatch { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("missing or corrupt files: {}", display_paths(.0))]
    MissingFiles(Vec<PathBuf>),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("stage dependency unmet: {0}")]
    Dependency(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: crate::pipeline::Stage,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn display_paths(paths: &[PathBuf]) -> String {
    paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

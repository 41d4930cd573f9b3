use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}: line {line}: {msg}")]
    Parse {
        file: String,
        line: u64,
        msg: String,
    },

    #[error("map format error: {0}")]
    MapFormat(String),

    #[error("invalid input data: {0}")]
    Data(String),

    #[error("variable `{0}` has zero variance over the fitting set")]
    ZeroVariance(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("model schema version {found} is incompatible (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("model validation failed: {0}")]
    ModelInvalid(String),

    #[error("missing upstream artifact {path}; run `{command}` first")]
    MissingArtifact { path: PathBuf, command: &'static str },

    #[error("output directory is locked by another run ({0}); remove the file if that run is gone")]
    Locked(PathBuf),

    #[error("fixed point did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("optimizer failed: {msg} (best objective {best_objective}, projected gradient norm {grad_norm:e})")]
    Optimizer {
        msg: String,
        best_objective: f64,
        grad_norm: f64,
        best_params: Vec<f64>,
    },

    #[error("clustering failed: {0}")]
    Clustering(String),

    #[error("cluster labels tie on every criterion; label the clusters manually")]
    LabelTie,

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(file: impl Into<String>, line: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code: 1 usage, 2 data error, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Locked(_) => 1,
            Error::NoConvergence { .. }
            | Error::Optimizer { .. }
            | Error::Singular(_)
            | Error::Clustering(_) => 3,
            _ => 2,
        }
    }
}

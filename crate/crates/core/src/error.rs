use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector must be non-empty and finite")]
    InvalidVector,

    #[error("label must be +1 or -1, got {0}")]
    InvalidLabel(f64),

    #[error("perturbation radius must be finite and >= 0, got {0}")]
    NegativeAlpha(f64),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("margin is undefined for the zero model")]
    UndefinedMargin,

    #[error("non-finite iterate at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dataset is not linearly separable through the origin")]
    NotSeparable,

    #[error("max-margin solver stopped after {iterations} sweeps with gap {gap:e}")]
    SolverNoConvergence { iterations: usize, gap: f64 },

    #[error("C_q scan for q={q} found no t below {limit}")]
    ScanExhausted { q: f64, limit: u64 },

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("unknown class {name:?}; available classes: {available:?}")]
    UnknownClass { name: String, available: Vec<String> },

    #[error("spherical code has {achieved} of {requested} codewords after {attempts} draws")]
    CodeShortfall {
        achieved: usize,
        requested: usize,
        attempts: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("every step size on the tuning grid diverged")]
    TuningFailed,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

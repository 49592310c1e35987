use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed plans file: {message}")]
    PlansFormat { path: PathBuf, message: String },

    #[error("duplicate plan id \"{0}\"")]
    DuplicateId(String),

    #[error("invalid plan \"{id}\": {}", .violations.join("; "))]
    InvalidPlan { id: String, violations: Vec<String> },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("zero-norm feature vector for plan \"{0}\"")]
    ZeroNorm(String),

    #[error("feature vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("raster resolution mismatch: {0} vs {1}")]
    ResolutionMismatch(usize, usize),

    #[error("unknown plan id \"{0}\"")]
    UnknownId(String),

    #[error("self-pair for plan \"{0}\"")]
    SelfPair(String),

    #[error("distance {dist} for pair ({i}, {j}) outside [0, 2]")]
    DistanceRange { i: String, j: String, dist: f64 },

    #[error("oracle failed on pair ({i}, {j}): {source}")]
    Oracle {
        i: String,
        j: String,
        #[source]
        source: Box<Error>,
    },

    #[error("need at least 3 plans to select triples, got {0}")]
    TooFewPlans(usize),

    #[error("distance table is empty")]
    EmptyTable,

    #[error("no anchor distances given")]
    NoAnchors,

    #[error("non-finite distance for pair ({0}, {1})")]
    NonFinite(String, String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("id sets differ between embeddings")]
    IdSetMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

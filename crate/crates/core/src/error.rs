use std::path::PathBuf;

/// Errors raised across the attribution pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },

    #[error("{0}")]
    Invariant(String),

    #[error("{0}")]
    Schema(String),

    #[error("node {0} does not exist in the model")]
    UnknownNode(usize),

    #[error("corpus too small: {have} traces, need at least {need}")]
    CorpusTooSmall { have: usize, need: usize },

    #[error("traces do not share the graph topology: {0}")]
    TopologyMismatch(String),

    #[error("exact Shapley limited to {limit} players, got {players}")]
    TooManyPlayers { players: usize, limit: usize },

    #[error("Monte Carlo Shapley needs at least {min} permutations, got {got}")]
    TooFewPermutations { got: usize, min: usize },

    #[error("trace has not failed: outcome {outcome:.4} >= success threshold {threshold:.4}")]
    NotFailed { outcome: f64, threshold: f64 },

    #[error("insufficient samples: {have}, need at least {need}")]
    InsufficientSamples { have: usize, need: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("similarity provider failed: {0}")]
    Provider(String),

    #[error("no instances found in {0}")]
    NoInstances(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

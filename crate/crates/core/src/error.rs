use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("malformed spectra for bug {bug_id}: {reason}")]
    MalformedSpectra { bug_id: String, reason: String },

    #[error("no spectra recorded for bug {0}")]
    MissingSpectra(String),

    #[error("no ground-truth labels for training bug {0}")]
    MissingLabels(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("non-finite parameter state: {0}")]
    NonFiniteState(String),

    #[error("faulty method {method_id} of bug {bug_id} is absent from the ranked list")]
    MissingFaulty { bug_id: String, method_id: String },

    #[error("too few non-zero pairs for the signed-rank test: {0} (need at least 5)")]
    TooFewPairs(usize),

    #[error("history is empty; a supervised model needs at least one training bug")]
    EmptyHistory,

    #[error("unknown bug id {0}")]
    UnknownBug(String),

    #[error("invalid data: {0}")]
    Data(String),
}

impl Error {
    /// Process exit code: 2 for configuration problems, 3 for data problems,
    /// 4 for numerical aborts.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::NonFiniteState(_) => 4,
            _ => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

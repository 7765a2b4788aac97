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

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("assignment is missing variable `{0}`")]
    MissingAssignment(String),

    #[error("policy has no tree for decision `{0}`")]
    MissingTree(String),

    #[error("leaf has no unused informational predecessors")]
    NotRefinable,

    #[error("instance exceeds the solver cap: more than {cap} information states")]
    TooLarge { cap: u64 },

    #[error("profile too short: needs step {step} but has {len} records")]
    ProfileTooShort { step: usize, len: usize },

    #[error("profile `{0}` has no known optimal value")]
    MissingOptimum(String),

    #[error("least-squares design is rank deficient")]
    RankDeficient,

    #[error("too few points: {got} given, more than {needed} required")]
    TooFewPoints { got: usize, needed: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } => 2,
            _ => 3,
        }
    }
}

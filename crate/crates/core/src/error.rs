use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("state {state} is out of range for variable `{variable}` with arity {arity}")]
    StateOutOfRange {
        variable: String,
        state: usize,
        arity: usize,
    },

    #[error("assignment has {got} entries but the network has {expected} variables")]
    AssignmentWidth { expected: usize, got: usize },

    /// The evidence is consistent with the model's domains but has probability zero.
    #[error("evidence has zero probability under the model")]
    ZeroProbabilityEvidence,

    #[error("query table would have {size} entries, above the limit of {limit}")]
    QueryTooLarge { size: usize, limit: usize },

    #[error("joint state space of {states} states exceeds the enumeration limit of {limit}")]
    StateSpaceTooLarge { states: u128, limit: u128 },

    #[error("record {record}: {source}")]
    Record {
        record: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no statistics for family {0}")]
    MissingFamily(String),

    #[error("dataset has a missing cell at record {record}, variable `{variable}`")]
    IncompleteData { record: usize, variable: String },

    #[error("dataset does not match the network: {0}")]
    DatasetMismatch(String),

    #[error("{location}: {message}")]
    Parse { location: String, message: String },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_record(self, record: usize) -> Self {
        match self {
            e @ Error::Record { .. } => e,
            e => Error::Record {
                record,
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// True when the failure is a zero-probability observation rather than malformed input.
    pub fn is_zero_probability(&self) -> bool {
        match self {
            Error::ZeroProbabilityEvidence => true,
            Error::Record { source, .. } | Error::File { source, .. } => source.is_zero_probability(),
            _ => false,
        }
    }
}

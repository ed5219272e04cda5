use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty fleet")]
    EmptyFleet,

    #[error("client {client_id}: field `{field}` must be strictly positive (got {value})")]
    InvalidProfile {
        client_id: usize,
        field: &'static str,
        value: f64,
    },

    #[error("duplicate client_id {0} in fleet")]
    DuplicateClient(usize),

    #[error("k = {k} is out of range for a fleet of {fleet_size} clients")]
    KOutOfRange { k: usize, fleet_size: usize },

    #[error("oracle limit: fleet of {n} clients exceeds the exhaustive-search limit of {limit}")]
    OracleLimit { n: usize, limit: usize },

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("no participation recorded")]
    NoParticipation,

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the user's input (configuration, schema,
    /// or data file contents) rather than by the run itself.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::Parse { .. }
                | Error::EmptyFleet
                | Error::InvalidProfile { .. }
                | Error::DuplicateClient(_)
                | Error::KOutOfRange { .. }
        )
    }
}

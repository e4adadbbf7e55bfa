use thiserror::Error;

/// Errors surfaced by graph construction, model fitting, and summarization.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unit list is empty")]
    EmptyUnits,
    #[error("duplicate unit id `{0}`")]
    DuplicateUnit(String),
    #[error("unknown unit id `{0}` in edge list")]
    UnknownUnit(String),
    #[error("self-loop edge on unit `{0}`")]
    SelfLoop(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("values are constant; statistic undefined")]
    ConstantValues,
    #[error("graph has no edges")]
    NoEdges,
    #[error("rho must lie in [0, 1], got {0}")]
    RhoOutOfRange(f64),
    #[error("unit {unit} is isolated: {context}")]
    IsolatedUnit { unit: usize, context: &'static str },
    #[error("precision matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid observation for `{unit}`: {reason}")]
    InvalidObservation { unit: String, reason: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("numerical failure at sweep {sweep}: {detail}")]
    NumericalFailure { sweep: usize, detail: String },
    #[error("draw shape mismatch: {0}")]
    DrawMismatch(String),
    #[error("county sets differ: {0}")]
    CountyMismatch(String),
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("io error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by malformed or invalid input data, as opposed
    /// to numerical breakdown during sampling. Drives CLI exit codes.
    pub fn is_data_error(&self) -> bool {
        !matches!(
            self,
            Error::NumericalFailure { .. } | Error::NotPositiveDefinite
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors returned by every fallible operation in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("direction is not a unit vector (norm {norm})")]
    NonUnitDirection { norm: f64 },
    #[error("directions are antipodal, s-vector undefined")]
    AntipodalDirections,
    #[error("invalid configuration: `{field}` {message}")]
    ConfigInvalid { field: String, message: String },
    #[error("rejection sampling exceeded {0} draws")]
    RejectionBudgetExceeded(usize),
    #[error("distance hypothesis must be positive, got {0}")]
    NonpositiveDistanceHypothesis(f64),
    #[error("need at least {needed} MPCs, got {got}")]
    InsufficientMpcs { needed: usize, got: usize },
    #[error("optimizer did not converge after {iterations} iterations")]
    SolverNoConverge { iterations: usize },
    #[error("observer has {k} MPCs, permutation enumeration is capped at {cap}")]
    PermutationBudgetExceeded { k: usize, cap: usize },
    #[error("linear system is rank deficient (condition number {condition:e})")]
    RankDeficient { condition: f64 },
    #[error("observer {observer}: side A has {a} MPCs, side B has {b}")]
    CountMismatch { observer: usize, a: usize, b: usize },
    #[error("MPC directions are required by this estimator")]
    MissingDirections,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::ConfigInvalid {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

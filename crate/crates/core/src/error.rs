use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse grouping of errors, used by front-ends to choose an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
    Mismatch,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },

    #[error("unknown column in header: {0}")]
    UnknownColumn(String),
    #[error("missing column in header: {0}")]
    MissingColumn(String),
    #[error("row {row}: too few fields ({found})")]
    MissingField { row: usize, found: usize },
    #[error("row {row}, column {column}: cannot parse {text:?} as a number")]
    UnparseableNumber {
        row: usize,
        column: String,
        text: String,
    },
    #[error("row {row}: unknown target label {label:?} (expected yes or no)")]
    UnknownTargetLabel { row: usize, label: String },
    #[error("malformed delimited text: {0}")]
    Csv(String),

    #[error("requested {requested} rows but only {available} are available")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("table holds only one class; cannot balance")]
    DegenerateClasses,
    #[error("table is empty")]
    EmptyTable,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("log-posterior or gradient is not finite at initialization (chain {chain})")]
    NonFiniteGradient { chain: usize },
    #[error("step size collapsed during adaptation (chain {chain})")]
    AdaptationFailure { chain: usize },

    #[error("need at least 4 draws per chain, got {0}")]
    TooFewDraws(usize),
    #[error("all draws are identical")]
    Degenerate,
    #[error("empty input")]
    EmptyInput,

    #[error("results were computed on different datasets (fingerprints {0:016x} vs {1:016x})")]
    DatasetMismatch(u64, u64),
    #[error("exact LOO is limited to 500 observations, got {0}")]
    TooLarge(usize),

    #[error("encoding metadata of new data differs from training: {0}")]
    EncodingMismatch(String),
    #[error("column {column}: level {level:?} was not seen in training")]
    UnseenLevel { column: String, level: String },

    #[error("grid quadrature supports at most 3 parameters, got {0}")]
    DimensionTooHigh(usize),
    #[error("grid moments moved by {0:.3e} when the bounds were widened")]
    GridTooCoarse(f64),
    #[error("function is not finite near the evaluation point")]
    NonFiniteEvaluation,

    #[error("corrupt chain file at byte offset {offset}: {reason}")]
    CorruptChainFile { offset: u64, reason: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidConfig(_) => ErrorClass::Usage,
            NonFiniteGradient { .. }
            | AdaptationFailure { .. }
            | TooFewDraws(_)
            | Degenerate
            | EmptyInput
            | DimensionTooHigh(_)
            | GridTooCoarse(_)
            | NonFiniteEvaluation
            | TooLarge(_) => ErrorClass::Numerical,
            DatasetMismatch(..)
            | EncodingMismatch(_)
            | UnseenLevel { .. }
            | DimensionMismatch(_) => ErrorClass::Mismatch,
            _ => ErrorClass::Data,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

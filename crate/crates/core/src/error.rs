use thiserror::Error;

/// Errors raised by band construction, simulation and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate domain: start {a} must be below end {b}")]
    DegenerateDomain { a: f64, b: f64 },

    #[error("grid needs at least 2 points, got {0}")]
    GridSize(usize),

    #[error("curve on a different grid (expected {expected} points on [{a}, {b}])")]
    GridMismatch { expected: usize, a: f64, b: f64 },

    #[error("curve has {got} values but grid has {expected} points")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value at grid index {0}")]
    NonFinite(usize),

    #[error("empty sample")]
    EmptySample,

    #[error("sample too small: need at least {need} curves, got {got}")]
    SampleTooSmall { need: usize, got: usize },

    #[error("modulation must be strictly positive (value {value} at grid index {index})")]
    NonPositive { index: usize, value: f64 },

    #[error("pathological input: {0}")]
    Pathological(String),

    #[error("significance level {alpha} outside {range}")]
    AlphaOutOfRange { alpha: f64, range: String },

    #[error("degenerate split: n = {n}, rho = {rho}")]
    DegenerateSplit { n: usize, rho: f64 },

    #[error("smoothing parameter tau = {0} outside [0, 1]")]
    TauOutOfRange(f64),

    #[error("covariance is not positive semi-definite (pivot {pivot} at row {row})")]
    NotPsd { row: usize, pivot: f64 },

    #[error("evaluation point {t} outside [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },

    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("row {row} has {got} values, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        got: usize,
    },

    #[error("grid values must be strictly increasing and uniform ({0})")]
    BadGrid(String),

    #[error("unsupported schema tag {found:?} (expected {expected:?})")]
    SchemaVersion { found: String, expected: String },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for errors that stem from the data's statistics rather than from
    /// configuration or I/O.
    pub fn is_statistical(&self) -> bool {
        matches!(
            self,
            Error::EmptySample
                | Error::SampleTooSmall { .. }
                | Error::NonPositive { .. }
                | Error::Pathological(_)
                | Error::NotPsd { .. }
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
                | Error::Parse { .. }
                | Error::RaggedRow { .. }
                | Error::BadGrid(_)
                | Error::SchemaVersion { .. }
        )
    }
}

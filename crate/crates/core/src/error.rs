use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FgdError {
    #[error("invalid Hurst index {0}")]
    InvalidHurst(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("circulant embedding has eigenvalue {value:e} at index {index}")]
    NegativeEigenvalue { index: usize, value: f64 },
    #[error("cholesky oracle limited to {cap} increments, got {requested}")]
    OracleTooLarge { requested: usize, cap: usize },
    #[error("covariance matrix is not numerically positive definite")]
    FactorizationFailed,
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("exponent {0} is outside the representable range")]
    Overflow(f64),
    #[error("euler state became non-positive at node {0}")]
    NonpositiveState(usize),
    #[error("{n} does not divide {m}")]
    NotADivisor { n: usize, m: usize },
    #[error("path has {nodes} nodes, need at least {needed}")]
    PathTooShort { nodes: usize, needed: usize },
    #[error("index {index} outside valid range {lo}..={hi}")]
    IndexOutOfRange { index: usize, lo: usize, hi: usize },
    #[error("degenerate ratio schedule: {0}")]
    DegenerateSchedule(String),
    #[error("variation statistic is zero")]
    ZeroVariation,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { got: usize, needed: usize },
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, FgdError>;

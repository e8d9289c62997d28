use thiserror::Error;

/// Errors raised by the regression toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum WocrError {
    #[error("column {0} has zero variance")]
    ConstantColumn(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("design matrix has no nonzero singular value")]
    ZeroMatrix,
    #[error("missing tuning parameter `{0}`")]
    MissingParam(&'static str),
    #[error("invalid tuning parameter `{name}` = {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("degrees of freedom {df} too close to n = {n}")]
    DegenerateDf { df: f64, n: usize },
    #[error("sum of squared errors must be nonnegative, got {0}")]
    NonpositiveSse(f64),
    #[error("objective is +inf at every probe")]
    AllInfinite,
    #[error("invalid search range [{lo}, {hi}] with {subdivisions} subdivisions")]
    InvalidRange { lo: f64, hi: f64, subdivisions: usize },
    #[error("model has no usable components")]
    SingularFit,
    #[error("too few rows: {0}")]
    TooFewRows(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, WocrError>;

use thiserror::Error;

/// Errors raised by the numerical core and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("series diverges: exponent {exponent} must exceed d/2 = {half_dim}")]
    DivergentExponent { exponent: f64, half_dim: f64 },

    #[error("truncation too small: tail estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    InsufficientTruncation { estimate: f64, tolerance: f64 },

    #[error("Gram matrix is not positive definite (breakdown at pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("zero denominator: the data vector has zero native norm")]
    ZeroDenominator,

    #[error("coarse periodization is not the fold of the fine one (max deviation {deviation:e})")]
    InconsistentPeriodization { deviation: f64 },

    #[error("no coarse-grid point produced a finite loss")]
    AllNonFinite,

    #[error("loss is not finite at the starting point")]
    NonFiniteStart,

    #[error("source location {location} is not a grid point")]
    OffGridSource { location: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or inconsistent input (lengths, non-finite values, bad parameters).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate geometry: all locations coincide")]
    DegenerateGeometry,

    #[error("constant variable: {0} has zero sample variance")]
    ConstantVariable(&'static str),

    #[error("nonpositive effective variance ({0})")]
    NonpositiveEffectiveVariance(f64),

    #[error("degenerate correlation: |r| = 1")]
    DegenerateCorrelation,

    #[error("insufficient effective sample size: M = {0} <= 2")]
    InsufficientEffectiveSampleSize(f64),

    #[error("degenerate coordinates: coordinate column {0} is constant")]
    DegenerateCoordinates(usize),

    #[error("covariance not positive definite (after jitter up to {0:e})")]
    NotPositiveDefinite(f64),

    #[error("size cap exceeded: {size} > {cap}")]
    CapExceeded { size: usize, cap: usize },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {path}: {msg}")]
    Io { path: String, msg: String },
}

impl Error {
    /// True for failures caused by the data being numerically degenerate,
    /// as opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateGeometry
                | Error::ConstantVariable(_)
                | Error::NonpositiveEffectiveVariance(_)
                | Error::DegenerateCorrelation
                | Error::InsufficientEffectiveSampleSize(_)
                | Error::DegenerateCoordinates(_)
                | Error::NotPositiveDefinite(_)
        )
    }
}

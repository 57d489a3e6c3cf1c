use thiserror::Error;

/// Errors raised by the analytic and stochastic modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("form factor is singular at the origin")]
    Singularity,
    #[error("quadrature did not converge: value {value:e}, error estimate {error:e}")]
    Accuracy { value: f64, error: f64 },
    #[error("root scan resolution: {0}")]
    ScanResolution(String),
    #[error("plateau ratio undefined: cos(beta) equals sin(alpha)")]
    UndefinedRatio,
    #[error("series does not cover the requested range: {0}")]
    Coverage(String),
    #[error("fit failed: {0}")]
    FitFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_positive(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter { name, reason: format!("must be positive and finite, got {v}") })
    }
}

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not reach tolerance {tol:e} (achieved estimate {achieved:e})")]
    QuadratureFailure { tol: f64, achieved: f64 },

    #[error("basis too small: tail population {tail:e} exceeds {tail_tol:e}; try dim >= {recommended_dim}")]
    BasisTooSmall {
        tail: f64,
        tail_tol: f64,
        recommended_dim: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() || value <= 0.0 {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and > 0, got {value}"),
        });
    }
    Ok(())
}

pub(crate) fn require_finite(name: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite, got {value}"),
        });
    }
    Ok(())
}

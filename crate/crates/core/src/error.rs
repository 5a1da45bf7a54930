use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("insufficient sample size: need at least {needed}, got {got}")]
    InsufficientSample { needed: usize, got: usize },
    #[error("failed to bracket root: {0}")]
    NoBracket(String),
    #[error("no convergence: {0}")]
    NonConvergent(String),
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("singular integrand: {0}")]
    Singular(String),
    #[error("malformed input: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(name: &'static str, reason: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter {
        name,
        reason: reason.into(),
    })
}

pub(crate) fn ensure_finite(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        invalid(name, format!("must be finite, got {x}"))
    }
}

use num_complex::Complex64;
use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A pole of an analytic expression was hit exactly. `index` names the
    /// offending spin when there is one.
    #[error("singular point at z = {z}{}", index.map(|i| format!(" (spin {i})")).unwrap_or_default())]
    SingularPoint { index: Option<usize>, z: Complex64 },

    #[error("no steady state: the system has no loss channel")]
    NoSteadyState,

    #[error("failed to converge: {0}")]
    NonConvergence(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

pub(crate) fn check_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} must be finite, got {x}"))
    }
}

pub(crate) fn check_nonneg(name: &str, x: f64) -> Result<()> {
    check_finite(name, x)?;
    if x < 0.0 {
        return invalid(format!("{name} must be non-negative, got {x}"));
    }
    Ok(())
}

pub(crate) fn check_positive(name: &str, x: f64) -> Result<()> {
    check_finite(name, x)?;
    if x <= 0.0 {
        return invalid(format!("{name} must be positive, got {x}"));
    }
    Ok(())
}

pub(crate) fn check_increasing(name: &str, xs: &[f64]) -> Result<()> {
    if let Some(bad) = xs.iter().position(|x| !x.is_finite()) {
        return invalid(format!("{name}[{bad}] is not finite"));
    }
    if let Some(i) = xs.windows(2).position(|w| w[1] <= w[0]) {
        return invalid(format!("{name} must be strictly increasing (index {} -> {})", i, i + 1));
    }
    Ok(())
}

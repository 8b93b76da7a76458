use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A frequency, position or interval falls outside the sampled range.
    #[error("range error: {0}")]
    Range(String),
    /// Resonance extraction produced unusable parameters.
    #[error("fit error: {0}")]
    Fit(String),
    /// The effective-mirror scale `a = κ_m/κ₁(ω_m)` is undefined.
    #[error("degenerate scale: {0}")]
    DegenerateScale(String),
    /// An operation was applied to the wrong kind of state.
    #[error("usage error: {0}")]
    Usage(String),
    /// Integration or grid settings violate a numerical precondition.
    #[error("configuration error: {0}")]
    Config(String),
    /// The integrator produced a non-finite value.
    #[error("numerical failure at t = {last_good_time}: {message}")]
    Numerical { last_good_time: f64, message: String },
    /// An observable was requested before the photon left the cavity.
    #[error("stale state: {0}")]
    StaleState(String),
    /// A spatial grid asks for more than the frequency grid can represent.
    #[error("resolution error: {0}")]
    Resolution(String),
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {value}")))
    }
}

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument fell outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A bath parameter failed validation.
    #[error("invalid bath parameter {name} = {value}: {reason}")]
    InvalidBath {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// A Matsubara series did not converge within the configured number
    /// of terms. Carries the bound on the neglected remainder.
    #[error("series truncated after {terms} terms; remainder bound {remainder:.3e} exceeds tolerance {tolerance:.3e}")]
    SeriesTruncation {
        terms: usize,
        remainder: f64,
        tolerance: f64,
    },

    /// Adaptive quadrature could not meet its tolerance.
    #[error("quadrature failed: {0}")]
    Quadrature(String),

    /// A Gaussian with C <= 0 (or c1 <= 0) cannot be normalized.
    #[error("non-normalizable Gaussian: {0}")]
    NonNormalizable(String),

    /// The eigenvalue ladder requires A > 0 and C > 0.
    #[error("spectrum undefined: A = {a}, C = {c}")]
    SpectrumUndefined { a: f64, c: f64 },

    /// The ODE step size underflowed; carries the last good time.
    #[error("integration failure at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    /// gamma = 0 leaves the Markovian generator singular.
    #[error("no stationary state: {0}")]
    NoStationaryState(String),

    /// Bad run configuration.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

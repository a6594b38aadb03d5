use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "quadrature did not converge after {subdivisions} subdivisions \
         (estimate {estimate:e}, error bound {error_bound:e})"
    )]
    NoConvergence {
        estimate: f64,
        error_bound: f64,
        subdivisions: usize,
    },

    #[error("integrand returned a non-finite value at x = {at}")]
    NonFiniteIntegrand { at: f64 },

    #[error("aggregate interference diverges for path-loss exponent {eta} (need eta > 2)")]
    DivergentInterference { eta: f64 },

    #[error(
        "coverage recurrence unstable: sum {sum} outside [0, 1] \
         (terms = {terms}, a = {a}, k0 = {k0})"
    )]
    NumericalInstability { sum: f64, terms: usize, a: f64, k0: f64 },

    #[error(
        "truncated tail bound {bound:e} exceeds tolerance {tolerance:e}; increase k_max (currently {k_max})"
    )]
    TailTooLarge {
        bound: f64,
        tolerance: f64,
        k_max: usize,
    },

    #[error("deployment is empty")]
    EmptyDeployment,

    #[error("total observed duration is zero")]
    ZeroDuration,

    #[error("capacity is zero; overhead ratio undefined")]
    ZeroCapacity,

    #[error("at least one trial is required")]
    NoTrials,

    #[error("vehicle start position lies outside the trusted region")]
    StartOutsideTrustedRegion,

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

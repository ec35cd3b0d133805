use thiserror::Error;

/// Errors raised by the computational modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A cumulant argument left the model's domain. Callers treat this as an
    /// inadmissible position (or a quote that does not exist for that volume).
    #[error("argument {value} outside cumulant domain {domain}")]
    Domain { value: f64, domain: String },

    #[error("cumulant is not differentiable at {value}")]
    NonDifferentiable { value: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid shock schedule: {0}")]
    Schedule(String),

    #[error("non-finite certainty equivalent ({0})")]
    Overflow(String),

    #[error("quadrature produced non-finite node values at t={t}, w={w}")]
    Quadrature { t: f64, w: f64 },

    #[error("no root of the completeness map for target {target} in [{lo}, {hi}]")]
    NoRoot { target: f64, lo: f64, hi: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A scenario configuration field is missing, malformed or out of range.
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::NonDifferentiable { .. } => "non_differentiable",
            Error::Parameter(_) => "parameter",
            Error::Schedule(_) => "schedule",
            Error::Overflow(_) => "overflow",
            Error::Quadrature { .. } => "quadrature",
            Error::NoRoot { .. } => "no_root",
            Error::Precondition(_) => "precondition",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
        }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

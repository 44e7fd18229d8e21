use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid value for `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("allocation has {got} entries but the game has {expected} subchannels")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("allocation uses {total} W but the power budget is {budget} W")]
    PowerConstraint { total: f64, budget: f64 },

    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("quadrature needs a bounded support; `{0}` is unbounded (truncate it first)")]
    UnboundedSupport(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { what: &'static str, iterations: usize, residual: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

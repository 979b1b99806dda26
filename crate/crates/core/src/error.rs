use thiserror::Error;

/// Errors raised by the model, solvers and simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrowFragError {
    #[error("domain error: {what} = {value} outside [{lo}, {hi}]")]
    Domain { what: &'static str, value: f64, lo: f64, hi: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical failure in {context}: {detail}")]
    Numerical { context: String, detail: String },
    #[error("no event possible: division and death rates are both zero")]
    NoEventPossible,
    #[error("power iteration did not converge after {iterations} iterations (mu = {mu}, residual = {residual:e})")]
    PowerIterationStalled { iterations: usize, mu: f64, residual: f64 },
    #[error("no supercritical root: mu({lambda}) = {mu} < 1 at the lower bracket")]
    NoSupercriticalRoot { lambda: f64, mu: f64 },
    #[error("CFL violation: dt = {dt} exceeds stable limit {limit}")]
    Cfl { dt: f64, limit: f64 },
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, GrowFragError>;

impl GrowFragError {
    pub(crate) fn numerical(context: impl Into<String>, detail: impl Into<String>) -> Self {
        GrowFragError::Numerical { context: context.into(), detail: detail.into() }
    }
}

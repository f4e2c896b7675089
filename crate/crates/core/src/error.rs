use thiserror::Error;

use crate::expr::{EvalError, ParseError};

/// Errors raised by the engine. Mathematical failures are verdicts, not
/// errors; these cover malformed input, unmet preconditions and numeric
/// breakdown.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("no interval for variable `{0}` in the domain box")]
    MissingInterval(String),
    #[error("invalid interval for `{var}`: [{lo}, {hi}]")]
    InvalidInterval { var: String, lo: f64, hi: f64 },
    #[error("sampling exhausted: {failures} of {samples} sample points raised domain errors in `{subexpr}`")]
    SamplingExhausted {
        subexpr: String,
        failures: usize,
        samples: usize,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("unexpected variable `{var}` in {context}")]
    StrayVariable { var: String, context: String },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("arity mismatch: {0}")]
    Arity(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

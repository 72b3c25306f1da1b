use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("evaluation failed at {point:?}: {source}")]
    Eval { point: Vec<f64>, source: EvalError },
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("metric is singular at {point:?} (det = {det:e})")]
    SingularMetric { point: Vec<f64>, det: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("precondition failed at {point:?}: {message}")]
    Precondition { point: Vec<f64>, message: String },
    #[error("geodesic left the chart: {0}")]
    ChartExit(String),
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("{0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub fn eval(point: &[f64], source: EvalError) -> Self {
        Error::Eval {
            point: point.to_vec(),
            source,
        }
    }

    pub fn precondition(point: &[f64], message: impl Into<String>) -> Self {
        Error::Precondition {
            point: point.to_vec(),
            message: message.into(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

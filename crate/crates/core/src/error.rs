use thiserror::Error;

use crate::expr::{EvalError, ParseError};

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in `{src}`: {source}")]
    Parse { src: String, source: ParseError },
    #[error("evaluation failed at {point:?}: {source}")]
    Eval { source: EvalError, point: Vec<f64> },
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("chart mismatch: {0}")]
    ChartMismatch(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unknown variable `{name}` in {context}")]
    UnknownVariable { name: String, context: String },
    #[error("{what} is singular at {point:?} (|det| = {det:e})")]
    Singular {
        what: String,
        point: Vec<f64>,
        det: f64,
    },
    #[error("path leaves the chart domain at t = {t}")]
    PathOutOfDomain { t: f64 },
    #[error("precondition `{what}` violated: residual {residual:e} at {point:?}")]
    Precondition {
        what: String,
        residual: f64,
        point: Vec<f64>,
    },
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("critical value: moment-map Jacobian rank deficient at {point:?} (smallest singular value {sigma_min:e})")]
    CriticalValue { point: Vec<f64>, sigma_min: f64 },
    #[error("empty level set: {0}")]
    EmptyLevelSet(String),
    #[error("chart is not adapted: kernel at {point:?} is spanned by {kernel:?}")]
    NotAdapted {
        point: Vec<f64>,
        kernel: Vec<Vec<f64>>,
    },
    #[error("rank of the two-form is {found} at {point:?}, expected {expected}")]
    Rank {
        expected: usize,
        found: usize,
        point: Vec<f64>,
    },
    #[error("reduced connection is not well defined: coefficients vary by {deviation:e} along the orbit through {point:?}")]
    WellDefinedness { deviation: f64, point: Vec<f64> },
    #[error("invalid scene: {0}")]
    Scene(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn parse_expr(src: &str) -> Result<crate::expr::Expr> {
    crate::expr::parse(src).map_err(|source| Error::Parse {
        src: src.to_string(),
        source,
    })
}

use thiserror::Error;

use crate::expr::ExprError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),

    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("degenerate metric at {point}: det g = {det:e}")]
    DegenerateMetric { point: String, det: f64 },

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("fields live on different charts (`{0}` vs `{1}`)")]
    ChartMismatch(String, String),

    #[error("variance mismatch: {0}")]
    Variance(String),

    #[error("degree error: {0}")]
    Degree(String),

    #[error("invalid resolution: {0}")]
    Resolution(String),

    #[error("incompatible right-hand side: weighted mean {mean:e} exceeds {tol:e}")]
    Compatibility { mean: f64, tol: f64 },

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("field evaluation failed at t = {t}: {source}")]
    FlowEvaluation { t: f64, source: ExprError },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("manifest: {0}")]
    Manifest(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

pub type Result<T, E = DysError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DysError {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid parameter {name}: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("non-finite {what}: {detail}")]
    NonFinite { what: &'static str, detail: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("row {row}, column {column}: {reason}")]
    Validation { row: usize, column: String, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no active main effects after stage 1; try a smaller sparsity weight (lambda = {lambda})")]
    NoActiveFeatures { lambda: f64 },

    #[error(
        "bisection did not reach {target} active features in {iterations} fits \
         (closest below: {closest_below:?}, closest above: {closest_above:?}, \
         bracket: [{lambda_low:?}, {lambda_high:?}])"
    )]
    BisectionExhausted {
        target: usize,
        iterations: usize,
        closest_below: Option<(f64, usize)>,
        closest_above: Option<(f64, usize)>,
        lambda_low: Option<f64>,
        lambda_high: Option<f64>,
    },

    #[error("unknown effect: {0}")]
    UnknownEffect(String),

    #[error("operation requires {expected} head, model uses {actual}")]
    HeadMode {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("no valid evaluation times")]
    NoValidTimes,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl DysError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        DysError::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(context: &'static str, expected: usize, actual: usize) -> Self {
        DysError::Shape {
            context,
            expected,
            actual,
        }
    }
}

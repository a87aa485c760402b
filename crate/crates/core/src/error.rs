use thiserror::Error;

/// Errors raised by the energy-signature toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("stage mismatch: expected {expected}, got {got}")]
    StageMismatch { expected: String, got: String },

    #[error("invalid label code {code} for {kind} (valid codes 0..{count})")]
    InvalidLabel {
        kind: &'static str,
        code: usize,
        count: usize,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("classes absent from training data: {}", .0.join(", "))]
    MissingClasses(Vec<String>),

    #[error("stratification infeasible: {0}")]
    Stratification(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

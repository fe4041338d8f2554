use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("sinkhorn did not converge after {iterations} iterations (marginal error {marginal_error:e})")]
    NotConverged { iterations: usize, marginal_error: f64 },

    #[error("enumeration budget exceeded: {required} maps > budget {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: loss {loss:e}")]
    Diverged {
        epoch: usize,
        loss: f64,
        /// Records of the epochs completed before the abort.
        curve: Vec<crate::denoiser::EpochRecord>,
    },

    #[error("pgm: {0}")]
    Pgm(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config field `{field}` (line {line}): {message}")]
    Config {
        field: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

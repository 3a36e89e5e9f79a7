use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schedule parameters: {0}")]
    InvalidScheduleParams(String),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("dimension mismatch: latent dim {latent}, condition dim {condition}")]
    DimMismatch { latent: usize, condition: usize },

    #[error("variance must be strictly positive (coordinate {index}: {value})")]
    NonPositiveVariance { index: usize, value: f64 },

    #[error("mixture has no components")]
    EmptyMixture,

    #[error("mixture weights must be positive and sum to 1 (sum = {sum})")]
    WeightsNotNormalized { sum: f64 },

    #[error("transitional direction is degenerate (norm {norm:e}); the two conditions are indistinguishable")]
    DegenerateDirection { norm: f64 },

    #[error("zero vector in directional similarity")]
    ZeroVector,

    #[error("timestep {t} out of range 1..={steps}")]
    StepOutOfRange { t: usize, steps: usize },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("invalid latent: {0}")]
    InvalidLatent(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error in {path} at line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation error in scenario `{scenario}`: {message}")]
    Validation { scenario: String, message: String },

    #[error("embedder error: {0}")]
    Embedder(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

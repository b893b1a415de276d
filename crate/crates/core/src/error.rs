use thiserror::Error;

/// Errors raised across the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("generators are not distinct: {0}")]
    NotDistinct(String),

    #[error("{context} is ill-conditioned (condition number {condition:.3e})")]
    IllConditioned { context: String, condition: f64 },

    #[error("generator pairing failed: off-diagonal leakage {leakage:.3e}")]
    Pairing { leakage: f64 },

    #[error("degenerate generator with modulus {modulus:.3e}")]
    DegenerateGenerator { modulus: f64 },

    #[error("no polynomial root near the unit circle (closest distance {distance:.3e})")]
    NoSolution { distance: f64 },

    #[error("direction ambiguity cannot be resolved: {0}")]
    Ambiguity(String),

    #[error("identifiability condition violated: {0}")]
    Identifiability(String),

    #[error("iterative solver failed: {0}")]
    Convergence(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

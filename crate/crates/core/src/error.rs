use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("flight exceeded {limit} cells without a reflection")]
    HorizonOverflow { limit: u64 },
    #[error("root finder did not converge: {0}")]
    Convergence(String),
    #[error("point is not in the domain of the map: {0}")]
    Domain(String),
    #[error("fixed-point iteration diverged at step {j} (r = {r:e}, v = {v:e})")]
    FixedPointDivergence { j: i64, r: f64, v: f64 },
    #[error("integrator step underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by grid construction, kernels, solvers and serialization.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value at index {idx}: {value}")]
    NonFinite { idx: usize, value: f64 },

    #[error("negative value at index {idx}: {value}")]
    Negative { idx: usize, value: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("solver budget exhausted after {iterations} iterations (value {value}, gap {gap})")]
    Budget { iterations: usize, value: f64, gap: f64 },

    #[error("unknown family `{0}`")]
    UnknownFamily(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = core::result::Result<T, Error>;

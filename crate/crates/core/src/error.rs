use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("basis dimension {dim} too small (need at least {min})")]
    DimensionTooSmall { dim: usize, min: usize },

    #[error("level index out of range: ({i}, {j}) with {levels} levels")]
    LevelOutOfRange { i: usize, j: usize, levels: usize },

    #[error("eigensolver failed on {dim}x{dim} matrix (frobenius norm {norm:e}, max asymmetry {asymmetry:e})")]
    Eigensolver { dim: usize, norm: f64, asymmetry: f64 },

    #[error("assembled matrix not hermitian: relative asymmetry {0:e}")]
    NotHermitian(f64),

    #[error("did not converge: {0}")]
    Convergence(String),

    #[error("state labeling failed: {0}")]
    Labeling(String),

    #[error("total dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("invalid dataset: {}", .0.join("; "))]
    Dataset(Vec<String>),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

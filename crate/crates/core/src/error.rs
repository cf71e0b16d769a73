use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("profile not resolved: {0}")]
    Unresolved(String),
    #[error("zero-mean condition violated: mean {mean:e} against norm {norm:e}")]
    ZeroMean { mean: f64, norm: f64 },
    #[error("quadrature did not converge: achieved error {achieved:e}, target {target:e}")]
    Quadrature { achieved: f64, target: f64 },
    #[error("eigensolver failure: {0}")]
    Eigen(String),
    #[error("branch lost during continuation: {0}")]
    BranchLoss(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

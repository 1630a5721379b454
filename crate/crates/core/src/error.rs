use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Domain(String),
    #[error("matrix is singular or numerically non-invertible")]
    NotInvertible,
    #[error("element lies in the indeterminate band (residual {residual:.3e})")]
    Indeterminate { residual: f64 },
    #[error("numerical rank is ambiguous; singular values {singular_values:?}")]
    RankAmbiguous { singular_values: Vec<f64> },
    #[error("twisting condition violated (residual {residual:.3e})")]
    Twist { residual: f64 },
    #[error("reality condition violated (residual {residual:.3e})")]
    Reality { residual: f64 },
    #[error("truncation lost too much mass ({mass:.3e}); increase the mode count")]
    Truncation { mass: f64 },
    #[error("{what} did not converge; residual history {history:?}")]
    NonConvergence { what: String, history: Vec<f64> },
    #[error("seed is not a vacuum (commutator residual {residual:.3e})")]
    NotVacuum { residual: f64 },
    #[error("evaluation at lambda = 0 hits a pole of order {order}")]
    Pole { order: i32 },
    #[error("loop flavor or shape mismatch: {0}")]
    Mismatch(String),
    #[error("invariant drift {drift:.3e} exceeded limit")]
    Drift { drift: f64 },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

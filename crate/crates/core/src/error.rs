use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite entry at position {0}")]
    NonFinite(usize),

    #[error("empty point or matrix")]
    Empty,

    #[error("affine set is empty: least-squares residual {residual:.3e} exceeds feasibility tolerance")]
    InfeasibleSet { residual: f64 },

    #[error("hyperplane family is inconsistent: residual {residual:.3e} exceeds feasibility tolerance")]
    InfeasibleIntersection { residual: f64 },

    #[error("set {0} has no row-constraint export; the direct oracle cannot be used")]
    UnsupportedOracle(usize),

    #[error("oracle limited to {limit} stacked rows, problem has {rows}")]
    OracleTooLarge { rows: usize, limit: usize },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

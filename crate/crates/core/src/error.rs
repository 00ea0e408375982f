use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point lies outside the Siegel domain (rho = {rho:e})")]
    OutsideDomain { rho: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("internal consistency violated: {0}")]
    Consistency(String),

    /// Quadrature refinement stopped before the requested relative tolerance was met.
    #[error("quadrature did not reach rel_tol {rel_tol:e}: last estimate {estimate:e}, previous {previous:e}")]
    Tolerance { estimate: f64, previous: f64, rel_tol: f64 },

    #[error("parameters lie in the divergent branch: {0}")]
    Divergent(String),

    #[error("lattice construction failed: sample {sample:?} is not covered (nearest lattice distance {gap:.6})")]
    Construction { sample: Vec<[f64; 2]>, gap: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

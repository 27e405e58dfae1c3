use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("matrix is not Hermitian (residual {0:e})")]
    NotHermitian(f64),
    #[error("entry {index} has modulus {modulus}, expected 1")]
    NotUnitModulus { index: usize, modulus: f64 },
    #[error("eigendecomposition failed on non-finite input")]
    NonFinite,
    #[error(
        "relaxation stopped after {iterations} iterations (primal residual {primal_residual:e}, dual residual {dual_residual:e}, gap {gap:e})"
    )]
    IterationLimit {
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
        gap: f64,
        /// Last iterate; its certified bound is still valid.
        partial: Box<crate::relaxation::RelaxationSolution>,
    },
    #[error("branching impossible: every arc of the box is a single point")]
    DegenerateBox,
    #[error("open node set is empty")]
    EmptyOpenSet,
    #[error("grid search supports at most 3 free phases, got {0}")]
    GridTooLarge(usize),
    #[error("analytic solution requires exactly one IRS element, got {0}")]
    NotSingleElement(usize),
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

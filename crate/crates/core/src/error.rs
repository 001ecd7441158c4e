use thiserror::Error;

/// Errors raised by the linear algebra kernels, the solvers and the I/O layer.
#[derive(Debug, Error)]
pub enum GspError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("NaN encountered in {0}")]
    NotANumber(&'static str),

    #[error("weighted norm radicand {value:e} is negative beyond round-off")]
    NegativeRadicand { value: f64 },

    #[error("matrix is not symmetric positive definite (pivot {pivot:e} at row {index})")]
    NotSpd { index: usize, pivot: f64 },

    #[error("matrix is singular (pivot {pivot:e} at row {index})")]
    Singular { index: usize, pivot: f64 },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive semi-definite (eigenvalue {eigenvalue:e})")]
    NotSpsd { eigenvalue: f64 },

    #[error("right-hand side is zero")]
    ZeroRhs,

    #[error("breakdown at iteration {k}: {what} = {value:e}")]
    Breakdown { k: usize, what: &'static str, value: f64 },

    #[error("{solver} requires a symmetric (1,1) block")]
    WrongSolver { solver: &'static str },

    #[error("stabilization block C has rank zero; the augmented form is degenerate")]
    DegenerateC,

    #[error("error estimate needs k >= d (k = {k}, d = {d})")]
    InsufficientHistory { k: usize, d: usize },

    #[error("dense kernel limited to dimension {limit}, got {dim}")]
    TooLarge { dim: usize, limit: usize },

    #[error("could not repair column rank of A")]
    RankRepair,

    #[error("iterate history was not retained; rerun with keep_iterates")]
    MissingHistory,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GspError>;

use thiserror::Error;

/// Unified error type for the crate.
///
/// Variants are grouped by the stage that raises them: input parsing and
/// validation, numerical routines, MCMC runs, and batch experiment cells.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unit index {index} out of range 1..={n}")]
    IndexRange { index: usize, n: usize },

    #[error("self loop on unit {0} is not allowed")]
    SelfLoop(usize),

    #[error("graph is not connected")]
    NotConnected,

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("spatial dependence parameter must lie in [0, 1), got {0}")]
    RhoDomain(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("balanced design required: {0}")]
    Unbalanced(String),

    #[error("covariate has zero variance and cannot be standardized")]
    ConstantCovariate,

    #[error("design matrix is rank deficient")]
    SingularDesign,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("chain diverged at iteration {iteration}: {detail}")]
    Divergence { iteration: usize, detail: String },

    #[error("spatial precision formula produced a nonpositive value ({0})")]
    DegeneratePrecision(f64),

    #[error("area means carry all covariate mass (d_dot >= n): threshold is infinite at leading order")]
    InfiniteSignal,

    #[error("cell {cell}: {excluded} of {total} replicates diverged, exceeding the 20% exclusion cap")]
    CellExclusion {
        cell: String,
        excluded: usize,
        total: usize,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

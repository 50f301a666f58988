use thiserror::Error;

/// Errors raised by mesh handling, space construction and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("unsupported quadrature degree {0} (supported: 1..=12)")]
    UnsupportedDegree(usize),

    #[error("cell {cell}: local pairing matrix is singular (degenerate cell)")]
    SingularCell { cell: usize },

    #[error("stress basis construction failed at {entity}: constraint residual {residual:e}")]
    Construction { entity: String, residual: f64 },

    #[error("rank mismatch for {what}: expected {expected}, found {found}")]
    RankMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("solver failure: {msg} (relative residual {residual:e})")]
    Solver { msg: String, residual: f64 },

    #[error("post-condition violated: {0}")]
    PostCondition(String),

    #[error("point ({x}, {y}) lies outside every cell")]
    PointOutside { x: f64, y: f64 },

    #[error("problem too large for dense computation: {ndof} unknowns (limit {limit})")]
    TooLarge { ndof: usize, limit: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

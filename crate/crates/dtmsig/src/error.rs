use thiserror::Error;

/// Errors produced by space construction, file ingestion and the statistical
/// operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("distance matrix is not square: {rows} rows, {cols} columns in row {row}")]
    NotSquare { rows: usize, cols: usize, row: usize },

    #[error("distance matrix asymmetry {max_dev:e} at ({i},{j}) exceeds tolerance {tol:e}")]
    Asymmetric {
        i: usize,
        j: usize,
        max_dev: f64,
        tol: f64,
    },

    #[error("negative distance {value} at ({i},{j})")]
    NegativeDistance { i: usize, j: usize, value: f64 },

    #[error("nonzero diagonal entry {value:e} at ({i},{i})")]
    NonzeroDiagonal { i: usize, value: f64 },

    #[error("triangle inequality violated by ({i},{j},{k}): d(i,k)={dik} > d(i,j)+d(j,k)={sum}")]
    MetricViolation {
        i: usize,
        j: usize,
        k: usize,
        dik: f64,
        sum: f64,
    },

    #[error("index {index} out of range for space of size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("query dimension {got} does not match space dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coordinate query is not valid for a distance-matrix space")]
    CoordinateQueryOnMatrix,

    #[error("mass parameter out of (0,1]: {0}")]
    MassOutOfRange(f64),

    #[error("pseudo-distance level out of [0,1): {0}")]
    LevelOutOfRange(f64),

    #[error("quantile level out of (0,1): {0}")]
    AlphaOutOfRange(f64),

    #[error("invalid subsample: {0}")]
    InvalidSubsample(String),

    #[error("transport oracle instance too large: {size} > cap {cap}")]
    SizeCapExceeded { size: usize, cap: usize },

    #[error("empty distribution")]
    EmptyDistribution,

    #[error("invalid test parameters: {0}")]
    InvalidParams(String),

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("mass {m} infeasible for shape: inner set is empty (epsilon {eps} vs limit {limit})")]
    InfeasibleMass { m: f64, eps: f64, limit: f64 },

    #[error("shape has zero reach; constant undefined")]
    ZeroReach,

    #[error("unsupported shape combination: {0}")]
    ShapeUnsupported(String),

    #[error("invalid generator spec: {0}")]
    InvalidGenerator(String),
}

pub type Result<T> = std::result::Result<T, Error>;

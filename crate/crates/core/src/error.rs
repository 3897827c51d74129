use thiserror::Error;

use crate::grid::GridId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interval: lower bound {lower} must be below upper bound {upper}")]
    InvalidInterval { lower: f64, upper: f64 },

    #[error("a grid needs at least one point")]
    EmptyGrid,

    #[error("grid points are not strictly increasing at index {index}")]
    UnorderedGrid { index: usize },

    #[error("density must be strictly positive, got {value} at t = {point}")]
    NonPositiveDensity { point: f64, value: f64 },

    #[error("function is aligned to grid {found:?} (len {found_len}) but grid {expected:?} (len {expected_len}) was required")]
    GridMismatch {
        expected: GridId,
        expected_len: usize,
        found: GridId,
        found_len: usize,
    },

    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("kernel is not self-adjoint: hermitian defect {defect:e} exceeds {limit:e}")]
    NonHermitian { defect: f64, limit: f64 },

    #[error("function lies outside the numerical range: residual {residual:e} exceeds tolerance {tolerance:e}")]
    RangeViolation { residual: f64, tolerance: f64 },

    #[error("index {index} out of range for grid of {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("transform is not injective: numerical rank {rank} < {required}")]
    NotInjective { rank: usize, required: usize },

    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed csv: {0}")]
    Parse(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

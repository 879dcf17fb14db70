use thiserror::Error;

use crate::dualopt::DualSolution;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row total {rows} differs from column total {cols}")]
    SumMismatch { rows: u128, cols: u128 },

    #[error("{side} margin at index {index} is {value}, expected a positive integer")]
    NonPositive {
        side: &'static str,
        index: usize,
        value: i64,
    },

    #[error("margins need at least 2 rows and 2 columns, got {m}x{n}")]
    Degenerate { m: usize, n: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("integer overflow: {0}")]
    Overflow(String),

    #[error("point outside the domain: {0}")]
    DomainViolation(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        /// Best iterate of the dual solver, when the failure came from it.
        best: Option<Box<DualSolution>>,
    },

    #[error("weight matrix has a zero entry at ({row}, {col}); the dual solver needs strictly positive weights")]
    ZeroWeightUnsupported { row: usize, col: usize },

    #[error("iterates ran to the domain boundary after {iterations} iterations without gradient decay")]
    DivergenceDetected { iterations: usize },

    #[error("solution is not attained")]
    NotAttained,

    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("non-positive matrix entry {value} at ({row}, {col})")]
    NonPositiveEntry { row: usize, col: usize, value: f64 },

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("state-space estimate {estimate} exceeds budget {budget}")]
    BudgetExceeded { estimate: f64, budget: f64 },

    #[error("not a probability distribution: {0}")]
    NotDistribution(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

use crate::solver::TypicalTable;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("margin vectors must be non-empty")]
    EmptyMargins,

    #[error("row sums total {rows} but column sums total {cols}")]
    MismatchedTotals { rows: u64, cols: u64 },

    #[error("{axis} sum {value} at position {index} is not positive")]
    NonPositiveEntry {
        axis: &'static str,
        index: usize,
        value: i64,
    },

    #[error("matrix entry ({row}, {col}) = {value} is negative or not finite")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("index ({row}, {col}) is outside a {rows}x{cols} matrix")]
    IndexOutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("total must be positive, got {0}")]
    NonPositiveTotal(f64),

    #[error("table does not have the expected margins: {0}")]
    MarginMismatch(String),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("argument outside its domain: {0}")]
    DomainViolation(String),

    #[error("solver did not converge in {max_iter} sweeps (residual {residual:e})")]
    NoConvergence {
        max_iter: usize,
        residual: f64,
        best: Box<TypicalTable>,
    },

    #[error("dynamic program exceeds its budget of {budget} states (estimate {estimate})")]
    BudgetExceeded { budget: usize, estimate: u128 },

    #[error("enumeration would produce more than {cap} tables")]
    CapExceeded { cap: usize },

    #[error("no table accepted after {0} attempts")]
    AttemptsExhausted(u64),

    #[error("alpha = {alpha} is below the admissible minimum {min}")]
    AlphaTooSmall { alpha: f64, min: f64 },

    #[error("matrix does not have zero row and column sums")]
    NotInSubspace,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

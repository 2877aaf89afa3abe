//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

/// Errors produced by the numerical routines and selectors.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside an operation's domain.
    Domain(String),
    /// The root-finding target lies above `f(0)`; no solution on `[0, inf)`.
    NoSolution { target: f64, at_zero: f64 },
    /// Bracket doubling exhausted without straddling the target.
    Divergence { last_hi: f64 },
    /// A collection is larger than the allowed search budget.
    BudgetExceeded { models: u128, budget: u64 },
    /// Input vectors or matrices have inconsistent lengths.
    DimensionMismatch { expected: usize, got: usize },
    /// The residual sum of squares fell below the floor of a log criterion.
    SaturatedFit,
    /// A selector was called with an empty model list.
    EmptyModelList,
    /// A selection hypothesis was violated; the run is refused.
    Refused(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::NoSolution { target, at_zero } => write!(
                f,
                "no solution: target {target} exceeds f(0) = {at_zero}"
            ),
            Error::Divergence { last_hi } => write!(
                f,
                "bracket search diverged: no sign change up to {last_hi}"
            ),
            Error::BudgetExceeded { models, budget } => write!(
                f,
                "search refused: collection holds {models} models, budget is {budget}"
            ),
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::SaturatedFit => write!(f, "saturated fit: rss below floor for log criterion"),
            Error::EmptyModelList => write!(f, "empty model list"),
            Error::Refused(msg) => write!(f, "refused: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

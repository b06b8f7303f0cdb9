//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the laboratory's numerical operations.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Invalid sizes, lengths or parameter values.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The hypotheses of a check do not hold for this input.
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// An iterative optimizer exhausted its budget.
    #[error("{what} did not converge after {iterations} iterations (best value {best_value:.12e}, gradient norm {grad_norm:.3e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        best_value: f64,
        grad_norm: f64,
        best: Vec<f64>,
    },

    /// A requested construction cannot be realized at the current resolution.
    #[error("target unreachable: {0}")]
    Unreachable(String),

    /// A sweep bracket does not straddle the dichotomy.
    #[error("invalid bracket: lower end {lo}, upper end {hi}")]
    Bracket { lo: String, hi: String },

    /// The state stopped being finite.
    #[error("non-finite state encountered")]
    Overflow,
}

pub type Result<T> = std::result::Result<T, Error>;

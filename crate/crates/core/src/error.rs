use thiserror::Error;

use crate::potentials::ValidationReport;

/// Errors produced by the numerical routines of this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a function.
    #[error("domain error in {function}: {detail}")]
    Domain {
        function: &'static str,
        detail: String,
    },

    /// A series or integral diverges at the requested argument.
    #[error("divergence in {function}: {detail}")]
    Divergence {
        function: &'static str,
        detail: String,
    },

    /// An iterative solver did not reach its tolerance.
    #[error(
        "{solver} did not converge after {iterations} iterations (last residual {residual:e})"
    )]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// An adaptive quadrature did not meet its tolerance.
    #[error("quadrature failure: {0}")]
    Quadrature(String),

    /// A root-finding bracket does not contain a sign change.
    #[error("bracket failure in {solver}: {detail}")]
    Bracket {
        solver: &'static str,
        detail: String,
    },

    /// The interaction potential violates the standing assumption for the
    /// requested trap frequency and coupling.
    #[error("potential fails validation: {}", .0.summary())]
    Validation(Box<ValidationReport>),

    /// A phase-space pair violates the normalisation constraint.
    #[error("admissibility error: {0}")]
    Admissibility(String),

    /// The spectral cutoff of the Hartree solver discards too much occupation.
    #[error("cutoff too low: {0}")]
    CutoffTooLow(String),

    /// A finite basis misses more than the admissible weight.
    #[error("basis truncation: {0}")]
    Truncation(String),

    /// Inputs are inconsistent with each other.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Reading an input file failed.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// An input file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(function: &'static str, detail: impl Into<String>) -> Error {
    Error::Domain {
        function,
        detail: detail.into(),
    }
}

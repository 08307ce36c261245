use alloc::string::String;
use core::fmt;

use crate::holonomy::ConvergenceDiagnostics;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the numerical core.
///
/// [`Error::is_config`] separates invalid inputs (bad parameters, unknown
/// table entries) from domain failures such as holonomy non-convergence; the
/// command-line runner maps the two classes to different exit codes.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Invalid parameters or inconsistent configuration.
    Config(String),
    /// A word or splice violates the transition matrix.
    Inadmissible(String),
    /// The bracket needs `x_0 == y_0`.
    BracketUndefined { x0: u8, y0: u8 },
    /// An operation precondition does not hold for the given inputs.
    Precondition(String),
    /// A holonomy truncation did not reach its tolerance.
    NonConvergence(ConvergenceDiagnostics),
    /// A sampled pair exceeded the declared Hölder certificate.
    CertificateViolation {
        declared: f64,
        observed: f64,
        /// Index of the sampled pair that broke the bound.
        pair_index: usize,
        /// Two-sided agreement radius of that pair.
        agreement: usize,
    },
    /// No pinching points were found, so twisting cannot be evaluated.
    NotApplicable(String),
    /// Broken internal invariant.
    Internal(String),
}

impl Error {
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Inadmissible(_))
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Inadmissible(msg) => write!(f, "inadmissible word: {msg}"),
            Error::BracketUndefined { x0, y0 } => {
                write!(f, "bracket undefined: x_0 = {x0} differs from y_0 = {y0}")
            }
            Error::Precondition(msg) => write!(f, "precondition failed: {msg}"),
            Error::NonConvergence(diag) => write!(
                f,
                "holonomy did not converge after {} steps (last increment {:e})",
                diag.stopped_at,
                diag.increments.last().copied().unwrap_or(f64::NAN)
            ),
            Error::CertificateViolation {
                declared,
                observed,
                pair_index,
                agreement,
            } => write!(
                f,
                "Hölder certificate violated: observed {observed:e} > declared {declared:e} \
                 (pair {pair_index}, agreement radius {agreement})"
            ),
            Error::NotApplicable(msg) => write!(f, "not applicable: {msg}"),
            Error::Internal(msg) => write!(f, "internal invariant violated: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

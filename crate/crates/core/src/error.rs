//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by model construction, simulation, estimation, and analysis.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A vector or matrix argument has the wrong length for the model dimension.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A parameter is outside its mathematical domain.
    #[error("{0}")]
    Domain(String),

    /// The interaction matrix is at or beyond the steady/non-steady transition.
    #[error("spectral radius {rho} >= 1")]
    Nonstationary { rho: f64 },

    /// An iterative method hit its iteration cap before reaching tolerance.
    /// `last` carries the final iterate so callers can inspect how close it got.
    #[error("{method} did not converge within {iterations} iterations (last iterate {last})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        last: f64,
    },

    /// Offspring mean at or above one: total progeny has no finite mean.
    #[error("supercritical offspring law: mean {mean} >= 1")]
    Supercritical { mean: f64 },

    /// The series is too short for the requested statistic.
    #[error("series too short: {got} periods, need more than {need}")]
    SeriesTooShort { need: usize, got: usize },
}

impl Error {
    /// Stable machine-readable category for CLI error reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::Domain(_) => "domain",
            Error::Nonstationary { .. } => "nonstationary",
            Error::NoConvergence { .. } => "no-convergence",
            Error::Supercritical { .. } => "supercritical",
            Error::SeriesTooShort { .. } => "series-too-short",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

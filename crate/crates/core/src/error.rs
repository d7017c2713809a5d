//! Error type shared across the crate.

/// Errors produced by grid construction, element builders, readout
/// projections and the loss fit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two objects that must share state (e.g. a frequency grid) do not.
    #[error("inconsistent state: {0}")]
    InconsistentState(String),

    /// Pump parameter at or above oscillation threshold (x >= 1).
    #[error("pump parameter x = {x} is at or above threshold (requires x < 1)")]
    AboveThreshold { x: f64 },

    /// A matrix that must be invertible was numerically singular.
    #[error("numerical singularity: {0}")]
    NumericalSingularity(String),

    /// Conditioning on an idler readout with vanishing spectrum.
    #[error("degenerate conditioning: {0}")]
    DegenerateConditioning(String),

    /// The least-squares fit did not converge within the iteration budget.
    #[error("fit failed to converge after {iterations} iterations (rms residual {residual_db:.6} dB)")]
    FitFailure { iterations: usize, residual_db: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Everything that can go wrong across the crate, from malformed states to
/// circuits that leak amplitude past their declared readout.
#[derive(Debug, Error)]
pub enum CoherenceError {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Raised by routines whose closed forms assume real non-negative
    /// amplitudes when handed a state with live phases.
    #[error("operation requires real non-negative amplitudes; strip phases first")]
    NonRealAmplitudes,

    /// The sorted partial sums of the source overtake the target's, so no
    /// strictly incoherent channel can perform the conversion.
    #[error("conversion infeasible: source partial sum exceeds target at sorted index {first_violation}")]
    Infeasible { first_violation: usize },

    #[error("Kraus family does not resolve the identity (Frobenius deviation {deviation:.3e})")]
    IncompleteChannel { deviation: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("circuit definition error: {0}")]
    Circuit(String),

    /// Amplitude ended up on paths outside every readout group.
    #[error("circuit leaks weight {leaked:.3e} outside the declared readout groups")]
    Leakage { leaked: f64 },
}

pub type Result<T> = std::result::Result<T, CoherenceError>;

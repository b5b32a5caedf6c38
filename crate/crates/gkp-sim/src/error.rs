use thiserror::Error;

/// Everything that can go wrong in the simulator.
///
/// Numerical failures are loud by design: a silently truncated oscillator or
/// an incomplete Kraus set produces plausible-looking garbage, so every
/// operation that can detect its own breakdown reports it here instead.
#[derive(Debug, Error)]
pub enum SimError {
    /// State or operator support has leaked into the top Fock levels beyond
    /// the configured tolerance.
    #[error("truncation: {0}")]
    Truncation(String),

    /// A matrix function's internal error estimate exceeded its bound.
    #[error("divergence: {0}")]
    Divergence(String),

    /// Dimension or space-tag mismatch between operands.
    #[error("shape: {0}")]
    Shape(String),

    /// An iterative construction failed to settle (comb teeth, sweeps).
    #[error("convergence: {0}")]
    Convergence(String),

    /// Code words too non-orthogonal to define a logical qubit.
    #[error("degeneracy: {0}")]
    Degeneracy(String),

    /// Caller asked for something the protocol family does not define.
    #[error("unsupported: {0}")]
    Spec(String),

    /// Kraus set fails the completeness sum rule beyond tolerance.
    #[error("completeness: {0}")]
    Completeness(String),

    /// Adaptive integrator step-size control collapsed.
    #[error("step control: {0}")]
    StepControl(String),

    /// Decay-rate extraction could not find an acceptable fit window.
    #[error("fit: {0}")]
    Fit(String),

    /// State preparation postcondition violated (low Bloch polarization).
    #[error("prep: {0}")]
    Prep(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;

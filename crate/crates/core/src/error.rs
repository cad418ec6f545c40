//! Error type shared by all simulator modules.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Physically or structurally invalid inputs (bad layout, odd group
    /// sizes, out-of-range mode index, ...).
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    /// A reduction formula was evaluated at a singular phase where its
    /// denominator vanishes.
    #[error("singular phase: {0}")]
    SingularPhase(String),

    /// The pole at `s` is (numerically) non-simple, so the residue formula
    /// does not apply.
    #[error("degenerate pole at s = {re} + {im}i (|denominator derivative| = {denom_abs})")]
    DegeneratePole { re: f64, im: f64, denom_abs: f64 },

    /// A residue evaluation was asked for with no poles available.
    #[error("empty pole set: {0}")]
    EmptyPoleSet(String),

    /// Step-size rule violated, or no step subdivision aligns the delays and
    /// schedule switches with the grid.
    #[error("step size: {0}")]
    StepSize(String),

    /// A retarded time or window fell outside the stored trajectory/grid.
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// The requested double-dark pair admits no positive (Ωτ, γτ) solution.
    #[error("infeasible dark-mode pair: {0}")]
    InfeasiblePair(String),

    /// Generic numerical failure (non-convergence, NaN in a trajectory, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

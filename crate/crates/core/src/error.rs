//! Error type shared across the crate.

use crate::flow::Trajectory;

/// Everything that can go wrong while constructing packets, integrating
/// trajectories, or assembling detection statistics.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The velocity field was sampled where the density is below the packet's
    /// node floor. Integration stops at the last accepted step; the partial
    /// trajectory is returned so the caller can decide whether to keep it.
    #[error("velocity field undefined near a density node at (t = {t}, x = {x})")]
    NearNode {
        t: f64,
        x: f64,
        partial: Box<Trajectory>,
    },

    /// Adaptive step size collapsed below machine resolution.
    #[error("integrator step size collapsed at t = {t}")]
    StepFailure { t: f64 },

    /// The probability mass carried by trajectories discarded near nodes
    /// exceeds the configured error budget.
    #[error("excluded near-node mass {excluded:e} exceeds error budget {budget:e}")]
    NearNodeMassExceeded { excluded: f64, budget: f64 },

    /// A hit-set boundary could not be refined to the requested tolerance.
    #[error("hit-set boundary in [{x_lo}, {x_hi}] could not be resolved")]
    UnresolvedBoundary { x_lo: f64, x_hi: f64 },

    /// The flux tail does not follow the 1/t^2 decay model, so the
    /// normalization integral cannot be extrapolated past the cutoff.
    #[error("flux tail at the cutoff does not fit the 1/t^2 decay model (relative spread {spread:e})")]
    TailNotConvergent { spread: f64 },

    /// Conditioning on detection is meaningless: the total detection
    /// probability is numerically zero.
    #[error("total detection probability {norm:e} is too small to condition on")]
    DegenerateConditioning { norm: f64 },

    /// Superposition terms cancel (or the term list is empty), leaving
    /// nothing to normalize.
    #[error("superposition carries no probability mass (raw norm {norm:e})")]
    DegenerateSuperposition { norm: f64 },

    /// The closed-form flow potential exists only for the plain Gaussian
    /// packet.
    #[error("flow potential is available only for the plain Gaussian packet")]
    FlowPotentialUnsupported,

    /// A caller-supplied argument is outside the supported domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Shorthand used by argument validation.
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

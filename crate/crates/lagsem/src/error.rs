use thiserror::Error;

/// Everything that can go wrong across the crate.
///
/// Variants are deliberately coarse: each one names a *mathematical* failure
/// mode (no root, divergent product, heavy Mellin tail, …) rather than the
/// routine that detected it, so callers can react uniformly no matter which
/// layer raised the condition.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument left the domain where the requested quantity is defined.
    #[error("domain violation: {0}")]
    DomainViolation(String),

    /// ψ has no zero in the open unit interval, so there is no admissible θ.
    #[error("psi has no root in (0, 1); psi(1/2) = {psi_half:.6e}")]
    NoRootInUnitInterval { psi_half: f64 },

    /// An iterative limit (Euler product, extrapolation, root polish) did not
    /// settle below its tolerance before hitting the iteration cap.
    #[error("no convergence: {what} (residual {residual:.3e} after {steps} steps)")]
    ConvergenceFailure {
        what: String,
        residual: f64,
        steps: usize,
    },

    /// The Mellin integrand decays too slowly for the inversion contour to be
    /// truncated at an acceptable cost.
    #[error("mellin integrand tail {tail:.3e} still above 1e-8 at |b| = {cutoff}")]
    SlowDecay { tail: f64, cutoff: f64 },

    /// A moment matrix lost positive definiteness (or produced negative
    /// weights / non-increasing nodes); the caller should lower the order.
    #[error("ill-conditioned moment problem at order {order}: {reason}")]
    IllConditioned { order: usize, reason: String },

    /// A quantity that is a squared norm came out negative beyond roundoff.
    #[error("squared norm came out negative: {value:.3e}")]
    NegativeNormResidual { value: f64 },

    /// Two routes that must agree to machine-level precision did not.
    #[error("identity violated: {what} deviates by {deviation:.3e}")]
    IdentityViolation { what: String, deviation: f64 },

    /// A simulated Lévy path ran out of clock before the Lamperti time change
    /// reached the requested horizon (and the path was not absorbed).
    #[error("path clock exhausted: needed additive horizon {needed:.3}, path covers {reached:.3}")]
    ClockOverrun { needed: f64, reached: f64 },

    /// Malformed run configuration (CLI arguments, JSON model files, …).
    #[error("bad configuration: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

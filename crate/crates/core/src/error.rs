use thiserror::Error;

/// Errors raised by the numerical engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("adaptive quadrature exceeded depth {max_depth} on [{lo}, {hi}]")]
    DepthExceeded { lo: f64, hi: f64, max_depth: u32 },

    #[error("integrand is not finite on [{lo}, {hi}]")]
    NonFinite { lo: f64, hi: f64 },

    #[error("epsilon {eps} is outside the valid range (0, {max}] for {kernel} kernels")]
    BadEpsilon {
        eps: f64,
        max: f64,
        kernel: &'static str,
    },

    #[error("moment system is ill-conditioned (pivot ratio {estimate:.3e})")]
    IllConditioned { estimate: f64 },

    #[error("moment verification failed: |mu_{order}| = {value:.3e} exceeds {tol:.1e}")]
    MomentCheck { order: usize, value: f64, tol: f64 },

    #[error("need at least {needed} usable samples, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("every deviation is within the noise floor; rate unresolvable")]
    AllBelowFloor,

    #[error("candidate is not C^{k} on the window: {reason}")]
    CandidateNotCk { k: u32, reason: String },

    #[error("{0} has no compact support")]
    Unbounded(&'static str),

    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

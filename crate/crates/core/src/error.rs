use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid law: {0}")]
    InvalidLaw(String),

    #[error("argument must be strictly positive, got {0}")]
    NonPositiveArgument(f64),

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("{what} did not converge after {iterations} iterations")]
    ConvergenceFailure { what: &'static str, iterations: usize },

    #[error("horizon {n_max} needs ~{bytes} bytes, above the {cap} byte cap")]
    HorizonTooLarge { n_max: usize, bytes: usize, cap: usize },

    #[error("series horizons differ: {left} vs {right}")]
    HorizonMismatch { left: usize, right: usize },

    #[error("law is not centered (drift {drift:e})")]
    NotCentered { drift: f64 },

    #[error("negative drift ({drift}) is not supported")]
    NegativeDriftUnsupported { drift: f64 },

    #[error("law fails the hypotheses: {0}")]
    HypothesesFailed(String),

    #[error("root partition ambiguous at s = {s}: root {root} lies {distance:e} from the unit circle")]
    RootClusterUnresolved { s: f64, root: String, distance: f64 },

    #[error("closed-form slope {closed} disagrees with extrapolated slope {extrapolated} for {what}")]
    SlopeMismatch {
        what: String,
        closed: f64,
        extrapolated: f64,
    },

    #[error("stationary measure check failed: residual {residual:e}")]
    StationarityFailure { residual: f64 },

    #[error("linear system is singular or ill-conditioned (condition ~{condition:e})")]
    SingularSystem { condition: f64 },

    #[error("resolvent requested for a stochastic (spectral radius 1) core")]
    NotInvertibleCentered,

    #[error("no reflections observed in the simulation")]
    NoReflectionsObserved,

    #[error("{0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the tournament toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("survival probability {survival:e} at x = {x} is below 1e-300")]
    SurvivalUnderflow { x: f64, survival: f64 },

    #[error("density is zero at x = {0}")]
    ZeroDensity(f64),

    #[error("found more than {cap} modes; the evaluation grid is probably pathological")]
    TooManyModes { cap: usize },

    #[error("rank {rank} outside 0..={n}")]
    RankOutOfRange { rank: usize, n: usize },

    #[error("quadrature on [{a}, {b}] missed the error target: estimate {error:e} > {target:e}")]
    QuadratureFailure { a: f64, b: f64, error: f64, target: f64 },

    #[error("marginal benefit {benefit} exceeds the marginal cost at the largest undominated effort ({max_marginal_cost})")]
    EffortOutOfRange { benefit: f64, max_marginal_cost: f64 },

    #[error("rank scores disagree: direct {direct} vs hazard form {hazard} (rank {rank})")]
    RepresentationMismatch { rank: usize, direct: f64, hazard: f64 },

    #[error("the global mode is not optimal for the winner-take-all schedule (best mode {witness}); pass an explicit threshold")]
    SufficiencyViolated { witness: f64 },

    #[error("a seed is required for Monte-Carlo runs")]
    SeedRequired,

    #[error("pay scheme violates {property}: {detail}")]
    PropertyViolation { property: &'static str, detail: String },

    #[error("likelihood ratio {value} at x = {x} exceeds the 1e6 cap")]
    UnboundedLikelihoodRatio { x: f64, value: f64 },

    #[error("no upper bound available: the density is neither log-concave nor log-convex")]
    NoBoundAvailable,

    #[error("all efforts are zero")]
    AllZeroEfforts,

    #[error("invalid prize schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid cost function: {0}")]
    InvalidCost(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sample too small: {len} observations, at least {min} required")]
    SampleTooSmall { len: usize, min: usize },

    #[error("no declared standard in the sample")]
    NoDeclaredStandard,
}

pub type Result<T> = std::result::Result<T, Error>;

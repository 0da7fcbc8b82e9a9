use thiserror::Error;

/// Failures raised anywhere in the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("gapless point: |d| = {gap:e} at k = ({k1}, {k2}), M = {mass}")]
    GaplessPoint {
        k1: f64,
        k2: f64,
        mass: f64,
        gap: f64,
    },
    #[error("plaquette phase {phase} exceeds pi/2; reduce the step")]
    StepTooLarge { phase: f64 },
    #[error("invalid step size {0}")]
    InvalidStep(f64),
    #[error("mass {0} is at or near a gap closing (0, +-2)")]
    CriticalMass(f64),
    #[error("lattice Chern sum {value} is not quantized (residual {residual:e})")]
    NonQuantized { value: f64, residual: f64 },
    #[error("grid must have at least {min} points per axis, got {got}")]
    GridTooSmall { min: usize, got: usize },

    #[error("POVM weights sum to {sum}, expected 2")]
    WeightSumViolation { sum: f64 },
    #[error("POVM completeness violated: |sum w_i m_i| = {residual:e}")]
    CompletenessViolation { residual: f64 },
    #[error("POVM element {index} has negative weight {weight}")]
    NegativeWeight { index: usize, weight: f64 },
    #[error("POVM has {count} elements; estimation of two parameters needs at least 3")]
    TooFewElements { count: usize },
    #[error("Naimark dilation failed: {0}")]
    DilationFailure(String),

    #[error("outcome {index} has zero probability but nonzero derivative; Fisher information diverges")]
    SingularOutcome { index: usize },
    #[error("quantum Fisher information is degenerate (det = {det:e})")]
    DegenerateQfi { det: f64 },
    #[error("Bloch vector at a spherical-coordinate pole (n3 = {n3})")]
    PoleSingularity { n3: f64 },
    #[error("classical Fisher information is singular (det = {det:e})")]
    SingularFim { det: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("weight matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("directions admit no non-negative weights; separating direction {certificate:?}")]
    InfeasibleDirections { certificate: [f64; 3] },
    #[error("all {restarts} restarts ended infeasible")]
    AllRestartsInfeasible { restarts: usize },
    #[error("{failed} of {trials} Monte Carlo trials failed: {first}")]
    TrialFailures {
        failed: usize,
        trials: usize,
        first: String,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),
    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for errors that come from user-supplied configuration rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Serialization(_))
    }
}

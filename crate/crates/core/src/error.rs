use thiserror::Error;

/// Errors raised by the analysis, simulation and optimization engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("{what} must be positive and finite, got {value}")]
    NonPositiveRate { what: String, value: f64 },
    #[error("correlation c[{sensor}][{process}] = {value} is outside [0, 1]")]
    CorrelationOutOfRange {
        sensor: usize,
        process: usize,
        value: f64,
    },
    #[error("preemption probability p[{sensor}] = {value} is outside [0, 1]")]
    ProbabilityOutOfRange { sensor: usize, value: f64 },
    #[error("process {process} is not covered by any sensor (sum_i c_ij * lambda_i = 0)")]
    UncoveredProcess { process: usize },
    #[error("process index {index} out of range (processes = {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("singular linear system while solving {what}")]
    SingularSystem { what: &'static str },
    #[error("transition rate {what} is negative ({value})")]
    NegativeTransitionRate { what: &'static str, value: f64 },
    #[error("invalid horizon: horizon = {horizon}, warmup = {warmup}")]
    InvalidHorizon { horizon: f64, warmup: f64 },
    #[error("replication count must be at least 1")]
    InvalidReplications,
    #[error("numerator coefficient g[{process}][{sensor}] = {value} is negative")]
    MonotonicityViolated {
        process: usize,
        sensor: usize,
        value: f64,
    },
    #[error("relaxation of the root node is infeasible")]
    InfeasibleBox,
    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("grid resolution must lie in (0, 0.5], got {0}")]
    InvalidResolution(f64),
    #[error("grid of {points} points exceeds budget of {budget}")]
    BudgetExceeded { points: f64, budget: u64 },
    #[error("invalid sweep parameter: {0}")]
    InvalidSweepParameter(String),
    #[error("invalid config document: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

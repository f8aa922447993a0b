use thiserror::Error;

use crate::rdm::SpinSector;

/// Errors raised by the reconstruction toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("symmetry violation in {sector} sector: residual {residual:.3e}")]
    SymmetryViolation { sector: SpinSector, residual: f64 },

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("1-RDM contraction needs at least 2 electrons, got {0}")]
    DegenerateSystem(usize),

    #[error("density matrix is not idempotent (residual {0:.3e})")]
    NotIdempotent(f64),

    #[error("reference matrix has zero Frobenius norm")]
    ZeroReference,

    #[error("no rank up to {0} meets the truncation target")]
    RankExhausted(usize),

    #[error("Fock space too large: {0} spin orbitals (limit 12)")]
    TooLarge(usize),

    #[error("requested {requested} samples but only {unique} unique elements exist")]
    BudgetExceedsUnique { requested: usize, unique: usize },

    #[error("objective became non-finite")]
    NonFiniteObjective,

    #[error("no grid point reached the target error")]
    NoFeasiblePoint,

    #[error("every optimization restart diverged")]
    OptimizationFailure,

    #[error("Pauli expectation {value} outside [-1, 1]")]
    UnphysicalExpectation { value: f64 },

    #[error("shot count exceeded the cap of {0}")]
    BudgetCap(u64),

    #[error("operation not valid in {0} mode")]
    ModeMismatch(&'static str),

    #[error("trace of {0} sector is zero")]
    ZeroTrace(SpinSector),

    #[error("model and target completions used different samplings")]
    SampleSetMismatch,

    #[error("post-processing steps out of order: {0}")]
    StepOrder(String),

    #[error("bundle format: {0}")]
    Bundle(String),

    #[error("table output: {0}")]
    Table(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Tags an error with the pipeline stage it came from.
    pub fn at(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

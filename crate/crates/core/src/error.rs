use thiserror::Error;

/// Errors raised by ruelle-lab operations. Residuals are reported as `f64`
/// regardless of the scalar type the computation ran in.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("orbit left the covered branches at step {step} (x = {x})")]
    TailEscape { step: usize, x: f64 },

    #[error("point {x} lies outside every branch domain")]
    OutsideDomain { x: f64 },

    #[error("solenoid history is exhausted; nothing to drop")]
    HistoryExhausted,

    #[error("operator is not normalized: max |R(1) - 1| = {residual:e}; apply a Doob transform first")]
    NormalizationRequired { residual: f64 },

    #[error("function is not harmonic: max |Rh - h| = {residual:e}")]
    NotHarmonic { residual: f64 },

    #[error("maps are not conjugate: max |T(sigma(x)) - sigma'(T(x))| = {deviation:e}")]
    NotConjugate { deviation: f64 },

    #[error("cell set is not invariant; offending cells {cells:?}")]
    InvariantSetViolation { cells: Vec<usize> },

    #[error("closed-form measure '{label}' has no exact pushforward; discretize it first")]
    MustDiscretize { label: String },

    #[error("absolute continuity fails at cells {cells:?}")]
    AbsoluteContinuity { cells: Vec<usize> },

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("cylinder table would hold {cylinders} entries (limit {limit})")]
    SizeLimit { cylinders: u128, limit: u128 },

    #[error("degenerate measure: {0}")]
    DegenerateMeasure(String),

    #[error("K1 certificate says {claimed} but recomputation gives {actual}")]
    InconsistentCertificate { claimed: bool, actual: bool },

    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("too many tail escapes: {escapes} of {steps} steps")]
    TooManyEscapes { escapes: usize, steps: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by measure construction, functional evaluation and audits.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("covariance is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("grid representations support dimensions 1 and 2 only (requested {0})")]
    GridDimension(usize),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid box too small: estimated tail mass {tail_mass:e} exceeds {limit:e}")]
    TailMassTooLarge { tail_mass: f64, limit: f64 },

    #[error("all grid weights vanish")]
    ZeroMass,

    #[error("non-finite value while evaluating {0}")]
    NonFinite(String),

    #[error("measure is not absolutely continuous with respect to the reference: {0}")]
    NotAbsolutelyContinuous(String),

    #[error("unsupported representation: {0}")]
    Unsupported(String),

    #[error("perturbation is not mean-zero under the base measure (mean {0:e})")]
    PerturbationNotCentered(f64),

    #[error("perturbed density is negative on [{lo}, {hi}] (min factor {min_factor:e})")]
    NegativePerturbation { lo: f64, hi: f64, min_factor: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("Sinkhorn did not converge at eps={eps:e}: marginal error {marginal_error:e}")]
    SinkhornNotConverged { eps: f64, marginal_error: f64 },

    #[error("Legendre supremum reached the search box boundary at {0:?}")]
    LegendreBoundary(Vec<f64>),

    #[error("invalid transport plan: {0}")]
    InvalidPlan(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("Var(V) = {variance} is not below n = {n}; numerical failure")]
    PotentialVarianceTooLarge { variance: f64, n: usize },

    #[error("time step {dt:e} violates stability bound; need dt <= {required:e}")]
    Unstable { dt: f64, required: f64 },

    #[error("solver fault: {0}")]
    SolverFault(String),

    #[error("particle blow-up at t = {0}")]
    BlowUp(f64),

    #[error("missing record: {0}")]
    MissingRecord(String),
}

pub type Result<T> = std::result::Result<T, Error>;

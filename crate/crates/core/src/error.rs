use thiserror::Error;

/// Errors raised by mesh construction, the solvers and the spectral routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("mesh resolution n = {n} is below the minimum of {min}")]
    ResolutionTooSmall { n: usize, min: usize },

    #[error("field has {got} entries, mesh has {expected} interior nodes")]
    SizeMismatch { expected: usize, got: usize },

    #[error("non-finite value {value} at node {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("invalid parameters: {constraint}: {detail}")]
    InvalidParams { constraint: &'static str, detail: String },

    #[error("linear solve did not converge after {iterations} iterations (residual {residual:e})")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("matrix is singular or not positive definite at pivot {pivot}")]
    Factorization { pivot: usize },

    #[error("fixed-point map is not a contraction at lambda = {lambda} (threshold lambda_0 = {lambda0})")]
    NotContraction { lambda: f64, lambda0: f64 },

    #[error("root bracket not certified for {what}: {detail}")]
    Bracket { what: &'static str, detail: String },

    #[error("bordered Jacobian is singular at lambda = {lambda}")]
    SingularJacobian { lambda: f64 },

    #[error("{solver} did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { solver: &'static str, iterations: usize, residual: f64 },

    #[error("continuation step collapsed at lambda = {lambda} (step {step:e})")]
    StepCollapse { lambda: f64, step: f64 },

    #[error("degenerate weight in component {component}: total mass {mass:e}")]
    DegenerateWeight { component: usize, mass: f64 },

    #[error("free energy increased by {increase:e} at sweep {sweep}")]
    EnergyIncrease { sweep: usize, increase: f64 },

    #[error("eigen iteration failed: {0}")]
    Eigen(String),

    #[error("{0}")]
    Undefined(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

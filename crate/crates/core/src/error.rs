use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("ambiguous lift: angular gap {gap:.6} at sample {index} is not below pi")]
    AmbiguousLift { index: usize, gap: f64 },
    #[error("evaluation at singular point ({0}, {1})")]
    SingularPoint(f64, f64),
    #[error("point ({0}, {1}) is outside the domain")]
    OutOfDomain(f64, f64),
    #[error("linear solve failed: {0}")]
    SolveFailure(String),
    #[error("incompatible degrees: outer winding {outer} != vortex sum {vortices} + inner windings {inner}")]
    IncompatibleDegrees { outer: i64, vortices: i64, inner: i64 },
    #[error("transport too far: {0}")]
    TransportTooFar(String),
    #[error("bad radius schedule: {0}")]
    BadSchedule(String),
    #[error("exponent p = {0} outside (1, 2]")]
    BadExponent(f64),
    #[error("solver stalled after {iterations} iterations (eps = {eps:e}, residual = {residual:e})")]
    SolverStalled { iterations: usize, eps: f64, residual: f64 },
    #[error("bad cutoff radius: {0}")]
    BadRadius(String),
    #[error("no critical point: {0}")]
    NoCriticalPoint(String),
    #[error("degree undefined: {0}")]
    DegreeUndefined(String),
    #[error("trust region violated: {0}")]
    TrustViolation(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

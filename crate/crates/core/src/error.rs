use thiserror::Error;

/// Errors raised by the geometry, assembly, stepping and metric routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("segment {index} is degenerate (length {length:e})")]
    DegenerateSegment { index: usize, length: f64 },

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("bad shape parameters: {0}")]
    BadShapeParams(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("surface energy is not positive at theta = {theta} (gamma = {value})")]
    NonpositiveGamma { theta: f64, value: f64 },

    #[error("anisotropy matrix is not positive definite at theta = {theta} (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { theta: f64, min_eigenvalue: f64 },

    #[error("bad substrate configuration: {0}")]
    BadSubstrate(String),

    #[error("singular matrix: pivot {pivot:e} at column {column}")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("linear solve residual too large: {residual:e}")]
    ResidualTooLarge { residual: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (last increment {last_increment:e}, growing: {growing})")]
    FixedPointDiverged {
        iterations: usize,
        last_increment: f64,
        growing: bool,
    },

    #[error("discrete energy is not positive: {0}")]
    NonpositiveEnergy(f64),

    #[error("modified energy increased at step {step}: {before} -> {after}")]
    EnergyIncreased {
        step: usize,
        before: f64,
        after: f64,
    },

    #[error("negative scaling factor zeta = {zeta} at step {step} with an energy that is not pi-periodic")]
    OrientationHazard { step: usize, zeta: f64 },

    #[error("no sign change of the contact-angle force on (0, pi)")]
    NoRoot,

    #[error("polygon {which} is self-intersecting")]
    SelfIntersecting { which: usize },

    #[error("initial area is zero")]
    ZeroInitialArea,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

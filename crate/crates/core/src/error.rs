use thiserror::Error;

/// Errors raised by knot construction and the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KnotError {
    #[error("grid size {0} must be even and at least 8")]
    InvalidGridSize(usize),

    #[error("curve is not immersed: |f'| = {speed:e} at grid index {index}")]
    NotImmersed { index: usize, speed: f64 },

    #[error("curve self-intersects at grid scale: |f(t_{i}) - f(t_{j})| = {distance:e}")]
    SelfIntersection { i: usize, j: usize, distance: f64 },

    #[error("image not compact: point {index:?} hits an inversion pole (distance {distance:e})")]
    ImageNotCompact { index: Option<usize>, distance: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} = {value} is out of range")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("grid mismatch: expected {expected} samples, found {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("fields live on different knots")]
    BaseMismatch,

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("negative weight {value:e} at grid index {index}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("near-degenerate weight at {} grid indices (first {first})", .indices.len())]
    DegenerateWeight { indices: Vec<usize>, first: usize },

    #[error("step failure at flow step {step}: energy {energy:e} did not decrease after {halvings} halvings")]
    StepFailure {
        step: usize,
        energy: f64,
        halvings: usize,
    },

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T, E = KnotError> = std::result::Result<T, E>;

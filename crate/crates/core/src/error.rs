//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by samplers, integrators and evaluators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown scenario `{name}`; available: {available}")]
    UnknownScenario { name: String, available: String },

    #[error("unknown candidate `{name}`; available: {available}")]
    UnknownCandidate { name: String, available: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("path diverged at step {step}: {what}")]
    DivergedPath { step: usize, what: String },

    #[error("field value diverged at step {step}")]
    DivergedField { step: usize },

    #[error("degenerate jacobian at step {step}: |det J| = {det:e}")]
    DegenerateJacobian { step: usize, det: f64 },

    #[error("jump-map inversion did not converge after {iterations} iterations (residual {residual:e})")]
    InversionFailure { iterations: usize, residual: f64 },

    #[error("jump map is singular: |det(I + dg/dy)| = {det:e}")]
    SingularJump { det: f64 },

    #[error("finite-difference oracle failed: {0}")]
    OracleFailure(#[source] Box<Error>),

    #[error("derivative stencil left the domain box at step {step}")]
    DomainExit { step: usize },

    #[error("time step violates the stability guard; use n_steps >= {suggested_n_steps}")]
    StepSize { suggested_n_steps: usize },

    #[error("kernel ratio undefined: denominator kernel vanished at step {step}")]
    RatioUndefined { step: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

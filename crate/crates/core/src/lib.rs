//! Pathwise stochastic calculus for jump-diffusion systems driven by Wiener
//! noise and a non-centered Poisson measure.
//!
//! The crate simulates solution paths of
//!
//! ```text
//! dx_i = a_i(t, x) dt + sum_k b_ik(t, x) dw_k(t) + jumps g_i(t, x; mark)
//! ```
//!
//! together with everything the associated calculus attaches to them:
//!
//! * the variational (Jacobian) flow and a finite-difference oracle for it
//!   ([`jacobian`]),
//! * pathwise evaluators for the generalized Itô formula and the
//!   Itô–Wentzell formula for random fields ([`calculus`]),
//! * kernel densities of stochastic integral invariants, along
//!   characteristics and on a one-dimensional grid ([`kernel`]),
//! * first-integral condition checks and conservation experiments
//!   ([`integral`]).
//!
//! Everything consumes one frozen [`noise::NoiseRealization`], so coupled
//! computations (a path and its Jacobian, a kernel and its grid solution, a
//! composite process and its field) see identical randomness and can be
//! compared pathwise rather than only in distribution.

pub mod error;
pub mod fd;
pub mod integrate;
pub mod jacobian;
pub mod noise;
pub mod stats;
pub mod system;

pub use error::{Error, Result};
pub use integrate::{evolve_scalar_field, simulate_path, FieldTrace, Path};
pub use jacobian::{jacobian_fd_oracle, simulate_jacobian, JacobianState};
pub use noise::{
    build_grid, refine_noise, sample_noise, JumpEvent, MarkSpace, NoiseRealization, TimeGrid,
};
pub use system::{
    build_scenario, get_scenario, validate_scenario, CoefficientField, DomainBox,
    ScalarFieldProcess, Scenario, ScenarioParams,
};

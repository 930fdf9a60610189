//! Implicit time integrators for the stochastic semilinear wave equation
//! `du_t - u_xx = F(u) dt + sigma(u) dW` on an interval, with P1 finite
//! elements in space and Monte Carlo tooling for strong convergence and
//! energy studies.
//!
//! Modules, bottom-up:
//!
//! * [`fem1d`]: mass/stiffness assembly, projection, norms, shifted solves
//! * [`noise`]: coupled Brownian increments on nested time grids
//! * [`problem`]: drift, diffusion and initial data
//! * [`stepper`]: the `theta = 0` and `theta = 1/2` schemes
//! * [`experiment`]: strong-error studies and energy sweeps


// `!(x > 0.0)` is used deliberately: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod error;
pub mod experiment;
pub mod fem1d;
pub mod noise;
pub mod parallel;
pub mod problem;
pub mod stepper;

pub use error::{Error, Result};
pub use fem1d::{FemOperators, Field, SpatialMesh};
pub use noise::{simulate_increments, IncrementLevel, NoiseSeed, TimeGrid};
pub use problem::ProblemSpec;
pub use stepper::{Scheme, SchemeConfig, Theta, TrajectoryState};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

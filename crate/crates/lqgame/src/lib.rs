//! Policy-gradient methods for finite-horizon zero-sum linear-quadratic
//! dynamic games, with the equivalent risk-sensitive (LEQG) and
//! disturbance-attenuation formulations.
//!
//! * [`lq_core`] — systems, recursions, gradients, best responses, Nash gains.
//! * [`exact_opt`] — PG / NPG / Gauss–Newton loops with exact gradients.
//! * [`zo_est`] — derivative-free estimators built on simulated rollouts.
//! * [`equiv`] — LEQG and disturbance-attenuation objectives and the game mapping.
//! * [`harness`] — JSON configs, the preset registry and the experiment runner.

pub mod error;
pub mod linalg;
pub mod exact_opt;
pub mod lq_core;
pub mod zo_est;
pub mod equiv;
pub mod harness;

pub use error::{LqError, Result};

//! Derivative-free machinery: bounded noise sampling, rollouts, one-point
//! minibatch gradient estimators and the zeroth-order drivers.
//!
//! Every Monte Carlo sample draws from its own [`Streams`] node, and batch
//! partial sums are reduced in a fixed order, so results depend only on the
//! seed and configuration.

mod config;
mod drivers;
mod estimators;
mod kernel;
mod sampling;
mod streams;

pub use config::{ZoConfig, MIN_RADIUS};
pub use drivers::{zo_double_loop, zo_inner, zo_outer, ZoDoubleLoopOutcome, ZoInnerOutcome, ZoOuterOutcome};
pub use estimators::{estimate_inner, estimate_outer, GradientEstimate, InnerOracle};
pub use sampling::{draw_noise, rollout, sample_unit_perturbation, NoiseDraw, Rollout};
pub use streams::Streams;

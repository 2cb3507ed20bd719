//! Risk-sensitive (LEQG) and disturbance-attenuation control problems,
//! their mapping onto a zero-sum game, and closed-form objectives and
//! gradients along their own Riccati recursions.
//!
//! Both formulations inflate the cost-to-go by the worst-case disturbance
//! channel, `P̃ = P + P D (γ²I − DᵀPD)⁻¹ DᵀP` (with `D = W^{1/2}`,
//! `γ² = β⁻¹` for LEQG), which is exactly the game's `P̃`. The controller
//! `K*` of the mapped game therefore satisfies each formulation's
//! stationarity condition whenever the formulation's own feasibility
//! margins (which also involve the initial-state term) are positive.

mod rde;
mod systems;
mod verify;

pub use rde::{da_gradients, da_rde, da_values, leqg_gradient, leqg_rde, leqg_value, RdeSolution};
pub use systems::{DaSystem, Formulation, LeqgSystem, NORMALISATION_TOL};
pub use verify::{verify_equivalence, EquivalenceReport};

//! System representation, Lyapunov/Riccati recursions, objective, exact
//! policy gradients, feasibility certificates and the saddle-point solver.

mod compact;
mod gains;
mod recursions;
mod riccati;
mod system;

pub use compact::{compactify, CompactGame};
pub use gains::{BlockDiag, GainSchedule, Player};
pub use recursions::{
    compact_correlation_matrix, compact_gradients, compact_value_matrix, correlation_matrix, evaluate, gradients,
    h_blocks, natural_factors, objective, value_matrix, Evaluation, Gradients,
};
pub(crate) use recursions::gradients_from;
pub use riccati::{grde, inner_riccati, pl_constant, smoothness_probe, InnerSolution, NashSolution};
pub use system::{NoiseKind, NoiseModel, TimeVaryingSystem};
pub(crate) use system::{check_shape, check_symmetric};

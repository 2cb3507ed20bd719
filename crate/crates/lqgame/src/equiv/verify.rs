//! Checks that the saddle-point controller of the mapped game is a
//! stationary point of the original formulation.

use crate::error::Result;
use crate::lq_core::{grde, GainSchedule};

use super::rde::{da_gradients, da_rde, da_trace_gradient_from, leqg_gradient, leqg_rde, rde_gains, steps_feasible, RdeSolution};
use super::systems::Formulation;

#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    /// `"leqg"` or `"da"`.
    pub formulation: &'static str,
    /// Saddle-point controller of the mapped game.
    pub k_star: GainSchedule,
    /// The formulation's RDE at `K*`.
    pub rde: RdeSolution,
    /// All feasibility margins of the RDE at `K*` are positive.
    pub formulation_feasible: bool,
    /// Per-step `‖K*_t − (R_t + B_tᵀP̃_{t+1}B_t)⁻¹B_tᵀP̃_{t+1}A_t‖`; NaN past a violated step.
    pub gain_discrepancy: Vec<f64>,
    /// `‖∇J(K*)‖` (LEQG) or `‖∇J₁(K*)‖` (log-det bound); `None` when infeasible.
    pub gradient_norm: Option<f64>,
    /// `‖∇J₂(K*)‖` of the trace bound (attenuation only). It needs only the
    /// step conditions, so it is reported even if `γ²I − P₀` fails.
    pub trace_gradient_norm: Option<f64>,
    /// Feasible, and every discrepancy and gradient norm is within `tol`.
    pub stationary: bool,
}

/// Maps `spec` to its game, solves the saddle-point recursion (the
/// standing assumption is required) and evaluates the formulation at `K*`.
pub fn verify_equivalence(spec: &Formulation, tol: f64) -> Result<EquivalenceReport> {
    let nash = grde(&spec.to_game())?.require_assumption()?;
    let k = nash.k_star;
    let (name, rde, gains, gradient_norm, trace_gradient_norm) = match spec {
        Formulation::Leqg(s) => {
            let rde = leqg_rde(s, &k)?;
            let gains = rde_gains(s.a(), s.b(), s.r(), &rde);
            let norm = if rde.feasible { Some(leqg_gradient(s, &k)?.norm()) } else { None };
            ("leqg", rde, gains, norm, None)
        }
        Formulation::Da(s) => {
            let rde = da_rde(s, &k)?;
            let gains = rde_gains(s.a(), s.b(), &s.r(), &rde);
            let norm = if rde.feasible { Some(da_gradients(s, &k)?.0.norm()) } else { None };
            let trace = steps_feasible(&rde).then(|| da_trace_gradient_from(s, &k, &rde).norm());
            ("da", rde, gains, norm, trace)
        }
    };
    let gain_discrepancy: Vec<f64> = gains.iter().zip(k.blocks()).map(|(g, kt)| (kt - g).norm()).collect();
    let formulation_feasible = rde.feasible;
    let stationary = formulation_feasible
        && gain_discrepancy.iter().chain(&gradient_norm).chain(&trace_gradient_norm).all(|x| *x <= tol);
    Ok(EquivalenceReport {
        formulation: name,
        k_star: k,
        rde,
        formulation_feasible,
        gain_discrepancy,
        gradient_norm,
        trace_gradient_norm,
        stationary,
    })
}

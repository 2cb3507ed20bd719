//! Inner-loop solver and the double-loop driver with implicit-regularisation
//! monitoring.

use std::time::Instant;

use crate::error::{LqError, Result};
use crate::linalg::{spd_solve, symmetrize};
use crate::lq_core::{evaluate, h_blocks, inner_riccati, BlockDiag, CompactGame, GainSchedule, InnerSolution};

use super::rules::{inner_direction, outer_direction, UpdateRule};
use super::trace::{RunStatus, RunTrace, TraceRecord};

/// Inner stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerStop {
    /// `G(K, L(K)) − G(K, L) ≤ ε₁`, with the exact best response as reference.
    Gap,
    /// `‖∇_L G‖_F ≤ ε₁`; needs no model knowledge.
    GradNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    pub eta: f64,
    pub alpha: f64,
    /// `ε₁`.
    pub inner_tol: f64,
    /// `ε₂`, on the running average `k⁻¹ Σ ‖F_κ‖²_F`.
    pub outer_tol: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub monitor_ir: bool,
    /// Use the exact best response instead of running the inner loop.
    pub exact_inner: bool,
    pub inner_stop: InnerStop,
    /// Optional extra stop on the current `‖F_k‖_F`.
    pub outer_grad_tol: Option<f64>,
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64, name: &str| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(LqError::InvalidParameter(format!("{name} must be positive and finite, got {x}")))
            }
        };
        pos(self.eta, "eta")?;
        pos(self.alpha, "alpha")?;
        pos(self.inner_tol, "inner_tol")?;
        pos(self.outer_tol, "outer_tol")?;
        if let Some(t) = self.outer_grad_tol {
            pos(t, "outer_grad_tol")?;
        }
        Ok(())
    }
}

/// Consecutive near-zero objective changes that count as a stall.
pub const STALL_WINDOW: usize = 50;
pub const STALL_EPS: f64 = 1e-14;
/// Relative slack on monotone ascent.
pub const ASCENT_SLACK: f64 = 1e-10;
/// Slack for the implicit-regularisation checks.
pub const IR_LAMBDA_SLACK: f64 = 1e-10;
pub const IR_P_SLACK: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct InnerOutcome {
    pub l: GainSchedule,
    pub trace: RunTrace,
    pub status: RunStatus,
}

/// Runs the inner loop from `l0` for fixed `k`.
pub fn solve_inner(
    rule: UpdateRule,
    game: &CompactGame,
    k: &GainSchedule,
    l0: &GainSchedule,
    cfg: &LoopConfig,
) -> Result<InnerOutcome> {
    cfg.validate()?;
    game.check_gains(k, l0)?;
    let reference = match cfg.inner_stop {
        InnerStop::Gap => Some(inner_riccati(game, k)?.objective),
        InnerStop::GradNorm => {
            inner_riccati(game, k)?;
            None
        }
    };
    let start = Instant::now();
    let mut trace = RunTrace::new();
    let mut l = l0.clone();
    let mut prev: Option<f64> = None;
    let mut flat_steps = 0;
    let mut status = RunStatus::MaxIterations;
    for it in 0..=cfg.max_inner {
        let ev = evaluate(game, k, &l);
        let obj = ev.objective;
        let grad_norm = ev.grads.grad_l.norm();
        trace.push(TraceRecord {
            iter: it,
            objective: obj,
            grad_norm,
            lambda_min_h: h_blocks(game, &ev.p).min_eig(),
            ir_ok: true,
            wall_time_s: start.elapsed().as_secs_f64(),
            zo: None,
        });
        if !obj.is_finite() || !grad_norm.is_finite() {
            status = RunStatus::Diverged { iter: it };
            break;
        }
        let done = match (cfg.inner_stop, reference) {
            (InnerStop::Gap, Some(r)) => r - obj <= cfg.inner_tol,
            _ => grad_norm <= cfg.inner_tol,
        };
        if done {
            status = RunStatus::Converged { iter: it };
            break;
        }
        if let Some(p) = prev {
            if obj < p - ASCENT_SLACK * p.abs().max(1.0) {
                status = RunStatus::StepsizeTooLarge { iter: it };
                break;
            }
            if (obj - p).abs() < STALL_EPS {
                flat_steps += 1;
                if flat_steps >= STALL_WINDOW {
                    status = RunStatus::Stalled { iter: it };
                    break;
                }
            } else {
                flat_steps = 0;
            }
        }
        prev = Some(obj);
        if it == cfg.max_inner {
            break;
        }
        l = l.axpy(cfg.eta, &inner_direction(rule, game, &ev)?);
    }
    Ok(InnerOutcome { l, trace, status })
}

/// Blocks `R^u + Bᵀ P̃ B` with `P̃` built from an arbitrary value matrix.
fn g_blocks_from(game: &CompactGame, p: &BlockDiag) -> Result<BlockDiag> {
    let s = game.system();
    let h = h_blocks(game, p);
    let mut out = Vec::with_capacity(game.horizon());
    for t in 0..game.horizon() {
        let pn = &p.blocks[t + 1];
        let dtp = s.d()[t].transpose() * pn;
        let x = spd_solve(&h.blocks[t], &dtp).ok_or_else(|| LqError::SingularMatrix(format!("H_{t}")))?;
        let pt = symmetrize(&(pn + dtp.transpose() * x));
        out.push(symmetrize(&(&s.ru()[t] + s.b()[t].transpose() * pt * &s.b()[t])));
    }
    Ok(BlockDiag::new(out))
}

#[derive(Debug, Clone)]
pub struct DoubleLoopOutcome {
    pub k: GainSchedule,
    /// Last inner-loop output (or exact best response).
    pub l: GainSchedule,
    /// One record per outer iteration: `G(K, L(K))`, `‖F‖_F`, `λ_min(H)`, IR flag.
    pub trace: RunTrace,
    pub status: RunStatus,
    pub inner_iterations: usize,
    /// Running averages `k⁻¹ Σ ‖F_κ‖²_F`.
    pub avg_sq_grad: Vec<f64>,
    /// First inner-loop failure status encountered, if any.
    pub inner_issue: Option<RunStatus>,
}

/// Outer/inner alternation from `k0` (inner warm-started at `l0`).
pub fn double_loop(
    game: &CompactGame,
    k0: &GainSchedule,
    l0: &GainSchedule,
    rules: (UpdateRule, UpdateRule),
    cfg: &LoopConfig,
) -> Result<DoubleLoopOutcome> {
    cfg.validate()?;
    game.check_gains(k0, l0)?;
    let (inner_rule, outer_rule) = rules;
    let start = Instant::now();
    let mut k = k0.clone();
    let mut sol: InnerSolution = inner_riccati(game, &k)?;
    let mut prev: Option<InnerSolution> = None;
    let mut l_bar = l0.clone();
    let mut trace = RunTrace::new();
    let mut sum_sq = 0.0;
    let mut avg_sq_grad = Vec::new();
    let mut inner_iterations = 0;
    let mut inner_issue = None;
    let mut status = RunStatus::MaxIterations;
    let monitored = cfg.monitor_ir && matches!(outer_rule, UpdateRule::Npg | UpdateRule::Gn);
    for it in 0..=cfg.max_outer {
        l_bar = if cfg.exact_inner {
            sol.l_star.clone()
        } else {
            let out = solve_inner(inner_rule, game, &k, &l_bar, cfg)?;
            inner_iterations += out.trace.len().saturating_sub(1);
            if !matches!(out.status, RunStatus::Converged { .. }) && inner_issue.is_none() {
                inner_issue = Some(out.status);
            }
            out.l
        };
        let ev = evaluate(game, &k, &l_bar);
        let f_norm = ev.grads.f.norm();
        let ir_ok = match &prev {
            None => true,
            Some(p) => {
                sol.lambda_min_h >= p.lambda_min_h - IR_LAMBDA_SLACK && sol.p.sub(&p.p).max_eig() <= IR_P_SLACK
            }
        };
        trace.push(TraceRecord {
            iter: it,
            objective: sol.objective,
            grad_norm: f_norm,
            lambda_min_h: sol.lambda_min_h,
            ir_ok,
            wall_time_s: start.elapsed().as_secs_f64(),
            zo: None,
        });
        if !f_norm.is_finite() {
            status = RunStatus::Diverged { iter: it };
            break;
        }
        if monitored && !ir_ok {
            status = RunStatus::IrViolation { iter: it };
            break;
        }
        sum_sq += f_norm * f_norm;
        let avg = sum_sq / (it + 1) as f64;
        avg_sq_grad.push(avg);
        if avg <= cfg.outer_tol || cfg.outer_grad_tol.is_some_and(|t| f_norm <= t) {
            status = RunStatus::Converged { iter: it };
            break;
        }
        if it == cfg.max_outer {
            break;
        }
        let g = if cfg.exact_inner { sol.g.clone() } else { g_blocks_from(game, &ev.p)? };
        let p_used = if cfg.exact_inner { &sol.p } else { &ev.p };
        let dir = outer_direction(outer_rule, game, &k, &l_bar, p_used, &g)?;
        k = k.axpy(-cfg.alpha, &dir);
        match inner_riccati(game, &k) {
            Ok(next) => {
                prev = Some(std::mem::replace(&mut sol, next));
            }
            Err(LqError::InfeasibleGain { step, eigenvalue }) => {
                status = RunStatus::Infeasible { iter: it + 1, step, eigenvalue };
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(DoubleLoopOutcome { k, l: l_bar, trace, status, inner_iterations, avg_sq_grad, inner_issue })
}

//! Zeroth-order inner loop, the zeroth-order-inner double loop with an exact
//! NPG outer step, and the zeroth-order outer NPG loop.

use std::time::Instant;

use crate::error::{LqError, Result};
use crate::exact_opt::{right_solve_sigma, RunStatus, RunTrace, TraceRecord, UpdateRule, ZoColumns, IR_LAMBDA_SLACK, IR_P_SLACK};
use crate::linalg::eig_floor;
use crate::lq_core::{evaluate, gradients, h_blocks, inner_riccati, BlockDiag, CompactGame, GainSchedule, InnerSolution};

use super::config::ZoConfig;
use super::estimators::{estimate_inner, estimate_outer, InnerOracle};
use super::streams::Streams;

const TAG_INNER: u64 = 10;
const TAG_OUTER: u64 = 11;

/// Floors every block of `Σ̂` at `φ/2`; returns the number of floored blocks.
fn floor_sigma(sigma: &BlockDiag, phi: f64) -> (BlockDiag, usize) {
    let mut hits = 0;
    let blocks = sigma
        .blocks
        .iter()
        .map(|b| {
            let (f, hit) = eig_floor(b, 0.5 * phi);
            hits += usize::from(hit);
            f
        })
        .collect();
    (BlockDiag::new(blocks), hits)
}

#[derive(Debug, Clone)]
pub struct ZoInnerOutcome {
    pub l: GainSchedule,
    pub trace: RunTrace,
    pub status: RunStatus,
    /// `Σ̂` blocks floored at `φ/2` over the run (a warning, not an error).
    pub floored: usize,
}

/// Algorithm-1 style inner loop: `cfg.inner_iters` ZO-PG or ZO-NPG steps on
/// `L` for fixed `K`. In validation mode, stops once the true gap is `≤ eps1`.
/// The trace's objective, gradient norm and `λ_min(H)` are exact (monitoring).
pub fn zo_inner(
    game: &CompactGame,
    k: &GainSchedule,
    l0: &GainSchedule,
    rule: UpdateRule,
    cfg: &ZoConfig,
    streams: &Streams,
) -> Result<ZoInnerOutcome> {
    cfg.validate()?;
    game.check_gains(k, l0)?;
    if rule == UpdateRule::Gn {
        return Err(LqError::InvalidParameter("the zeroth-order inner loop supports pg and npg".into()));
    }
    let reference = inner_riccati(game, k)?.objective;
    let start = Instant::now();
    let mut trace = RunTrace::new();
    let mut l = l0.clone();
    let mut floored = 0;
    let mut status = RunStatus::MaxIterations;
    for it in 0..=cfg.inner_iters {
        let ev = evaluate(game, k, &l);
        let mut rec = TraceRecord {
            iter: it,
            objective: ev.objective,
            grad_norm: ev.grads.grad_l.norm(),
            lambda_min_h: h_blocks(game, &ev.p).min_eig(),
            ir_ok: true,
            wall_time_s: 0.0,
            zo: Some(ZoColumns { batch_size: cfg.m1, radius: cfg.r1, estimator_cosine: None }),
        };
        let finish = |trace: &mut RunTrace, mut rec: TraceRecord| {
            rec.wall_time_s = start.elapsed().as_secs_f64();
            trace.push(rec);
        };
        if !ev.objective.is_finite() {
            finish(&mut trace, rec);
            status = RunStatus::Diverged { iter: it };
            break;
        }
        if cfg.validation && reference - ev.objective <= cfg.eps1 {
            finish(&mut trace, rec);
            status = RunStatus::Converged { iter: it };
            break;
        }
        if it == cfg.inner_iters {
            finish(&mut trace, rec);
            break;
        }
        let est = estimate_inner(game, k, &l, cfg, &streams.child(it as u64))?;
        if cfg.validation {
            if let Some(zo) = rec.zo.as_mut() {
                zo.estimator_cosine = Some(est.grad.cosine(&ev.grads.grad_l));
            }
        }
        finish(&mut trace, rec);
        let dir = match rule {
            UpdateRule::Pg => est.grad,
            _ => {
                let (sig, hits) = floor_sigma(&est.sigma, game.phi());
                floored += hits;
                right_solve_sigma(&est.grad, &sig)?
            }
        };
        l = l.axpy(cfg.eta, &dir);
    }
    Ok(ZoInnerOutcome { l, trace, status, floored })
}

#[derive(Debug, Clone)]
pub struct ZoDoubleLoopOutcome {
    pub k: GainSchedule,
    pub l: GainSchedule,
    /// One record per outer iteration: `G(K, L(K))`, `‖F(K, L̄)‖`, `λ_min(H)`, IR flag.
    pub trace: RunTrace,
    pub status: RunStatus,
    /// Final true inner gap `G(K, L(K)) − G(K, L̄)` of every inner run.
    pub inner_gaps: Vec<f64>,
    pub inner_traces: Vec<RunTrace>,
    pub floored: usize,
}

fn ir_ok(prev: Option<&InnerSolution>, sol: &InnerSolution) -> bool {
    prev.is_none_or(|p| sol.lambda_min_h >= p.lambda_min_h - IR_LAMBDA_SLACK && sol.p.sub(&p.p).max_eig() <= IR_P_SLACK)
}

/// Zeroth-order inner loop (warm-started) with an exact outer NPG step
/// `K ← K − α ∇_K G(K, L̄) Σ_{K,L̄}⁻¹`, for `cfg.outer_iters` iterations or
/// until `k⁻¹ Σ ‖F‖² ≤ eps2`.
pub fn zo_double_loop(
    game: &CompactGame,
    k0: &GainSchedule,
    l0: &GainSchedule,
    inner_rule: UpdateRule,
    cfg: &ZoConfig,
) -> Result<ZoDoubleLoopOutcome> {
    cfg.validate()?;
    game.check_gains(k0, l0)?;
    let streams = Streams::new(cfg.seed).child(TAG_INNER);
    let start = Instant::now();
    let mut k = k0.clone();
    let mut l_bar = l0.clone();
    let mut sol = inner_riccati(game, &k)?;
    let mut prev: Option<InnerSolution> = None;
    let mut trace = RunTrace::new();
    let mut inner_gaps = Vec::new();
    let mut inner_traces = Vec::new();
    let mut floored = 0;
    let mut sum_sq = 0.0;
    let mut status = RunStatus::MaxIterations;
    for it in 0..=cfg.outer_iters {
        let inner = zo_inner(game, &k, &l_bar, inner_rule, cfg, &streams.child(it as u64))?;
        floored += inner.floored;
        l_bar = inner.l;
        inner_traces.push(inner.trace);
        let ev = evaluate(game, &k, &l_bar);
        inner_gaps.push(sol.objective - ev.objective);
        let f_norm = ev.grads.f.norm();
        trace.push(TraceRecord {
            iter: it,
            objective: sol.objective,
            grad_norm: f_norm,
            lambda_min_h: sol.lambda_min_h,
            ir_ok: ir_ok(prev.as_ref(), &sol),
            wall_time_s: start.elapsed().as_secs_f64(),
            zo: Some(ZoColumns { batch_size: cfg.m1, radius: cfg.r1, estimator_cosine: None }),
        });
        if !f_norm.is_finite() {
            status = RunStatus::Diverged { iter: it };
            break;
        }
        sum_sq += f_norm * f_norm;
        if sum_sq / (it + 1) as f64 <= cfg.eps2 {
            status = RunStatus::Converged { iter: it };
            break;
        }
        if it == cfg.outer_iters {
            break;
        }
        k = k.axpy(-cfg.alpha, &right_solve_sigma(&ev.grads.grad_k, &ev.sigma)?);
        match inner_riccati(game, &k) {
            Ok(next) => prev = Some(std::mem::replace(&mut sol, next)),
            Err(LqError::InfeasibleGain { step, eigenvalue }) => {
                status = RunStatus::Infeasible { iter: it + 1, step, eigenvalue };
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ZoDoubleLoopOutcome { k, l: l_bar, trace, status, inner_gaps, inner_traces, floored })
}

#[derive(Debug, Clone)]
pub struct ZoOuterOutcome {
    pub k: GainSchedule,
    pub trace: RunTrace,
    pub status: RunStatus,
    pub floored: usize,
    /// Perturbed gains without a best response, summed over iterations.
    pub infeasible_samples: usize,
}

/// Algorithm-2 style outer loop: `cfg.outer_iters` steps of
/// `K ← K − α ∇̂_K Σ̂⁻¹`. Records exact `G(K, L(K))`, `‖F(K, L(K))‖` and
/// `λ_min(H)` at every iterate; an iterate leaving 𝒦 ends the run with
/// [`RunStatus::Infeasible`].
pub fn zo_outer(game: &CompactGame, k0: &GainSchedule, cfg: &ZoConfig, oracle: &InnerOracle) -> Result<ZoOuterOutcome> {
    cfg.validate()?;
    game.check_k(k0)?;
    let streams = Streams::new(cfg.seed).child(TAG_OUTER);
    let start = Instant::now();
    let mut k = k0.clone();
    let mut sol = inner_riccati(game, &k)?;
    let mut prev: Option<InnerSolution> = None;
    let mut trace = RunTrace::new();
    let mut floored = 0;
    let mut infeasible_samples = 0;
    let mut status = RunStatus::MaxIterations;
    for it in 0..=cfg.outer_iters {
        let mut rec = TraceRecord {
            iter: it,
            objective: sol.objective,
            grad_norm: sol.outer_f(game, &k).norm(),
            lambda_min_h: sol.lambda_min_h,
            ir_ok: ir_ok(prev.as_ref(), &sol),
            wall_time_s: 0.0,
            zo: Some(ZoColumns { batch_size: cfg.m2, radius: cfg.r2, estimator_cosine: None }),
        };
        if it == cfg.outer_iters {
            rec.wall_time_s = start.elapsed().as_secs_f64();
            trace.push(rec);
            break;
        }
        let (est, _) = estimate_outer(game, &k, cfg, oracle, &streams.child(it as u64))?;
        infeasible_samples += est.infeasible;
        if cfg.validation {
            let exact = gradients(game, &k, &sol.l_star).grad_k;
            if let Some(zo) = rec.zo.as_mut() {
                zo.estimator_cosine = Some(est.grad.cosine(&exact));
            }
        }
        rec.wall_time_s = start.elapsed().as_secs_f64();
        trace.push(rec);
        let (sig, hits) = floor_sigma(&est.sigma, game.phi());
        floored += hits;
        k = k.axpy(-cfg.alpha, &right_solve_sigma(&est.grad, &sig)?);
        match inner_riccati(game, &k) {
            Ok(next) => prev = Some(std::mem::replace(&mut sol, next)),
            Err(LqError::InfeasibleGain { step, eigenvalue }) => {
                status = RunStatus::Infeasible { iter: it + 1, step, eigenvalue };
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ZoOuterOutcome { k, trace, status, floored, infeasible_samples })
}

//! Single-loop natural-gradient descent–ascent schemes. They carry no
//! feasibility safeguard and are expected to blow up on the benchmark.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{LqError, Result};
use crate::linalg::Mat;
use crate::lq_core::{h_blocks, BlockDiag, CompactGame, GainSchedule};

use super::trace::{RunTrace, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GdaScheme {
    /// Alternating: descent on `K`, then ascent on `L` at the new `K`.
    Angda,
    /// Simultaneous steps with `η = τ α`.
    TauNgda,
    /// `ascent_steps` ascent steps on `L`, then one descent step on `K`.
    DescentMultiStepAscent,
}

impl FromStr for GdaScheme {
    type Err = LqError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "angda" => Ok(Self::Angda),
            "tau-ngda" | "tau_ngda" => Ok(Self::TauNgda),
            "dmsa" | "descent-multi-step-ascent" => Ok(Self::DescentMultiStepAscent),
            other => Err(LqError::InvalidParameter(format!("unknown descent-ascent scheme `{other}`"))),
        }
    }
}

impl fmt::Display for GdaScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Angda => "angda",
            Self::TauNgda => "tau-ngda",
            Self::DescentMultiStepAscent => "dmsa",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdaConfig {
    pub eta: f64,
    pub alpha: f64,
    pub ascent_steps: usize,
    pub iters: usize,
    /// `|G|` above this (or any non-finite value) stops the run.
    pub cap: f64,
    /// Growth of `|G|` over its initial value that counts as divergence.
    pub growth_threshold: f64,
    /// Record every `record_stride`-th iteration (plus the first and last).
    pub record_stride: usize,
    /// Stop as soon as the growth threshold is reached.
    pub stop_on_divergence: bool,
}

impl GdaConfig {
    pub fn new(eta: f64, alpha: f64, ascent_steps: usize, iters: usize) -> Self {
        Self { eta, alpha, ascent_steps, iters, cap: 1e12, growth_threshold: 10.0, record_stride: 1, stop_on_divergence: true }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.alpha > 0.0 && self.eta.is_finite() && self.alpha.is_finite()) {
            return Err(LqError::InvalidParameter("descent-ascent stepsizes must be positive".into()));
        }
        if self.ascent_steps == 0 || self.record_stride == 0 || !(self.cap > 0.0) || !(self.growth_threshold > 1.0) {
            return Err(LqError::InvalidParameter("invalid descent-ascent configuration".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GdaOutcome {
    pub trace: RunTrace,
    pub k: GainSchedule,
    pub l: GainSchedule,
    /// `|G|` exceeded the cap or became non-finite.
    pub blew_up: bool,
    /// `max_t |G_t| / |G_0|`.
    pub growth: f64,
    /// `blew_up` or `growth ≥ growth_threshold`.
    pub diverged: bool,
    pub iterations: usize,
}

/// Fused, allocation-free evaluation of `P_{K,L}`, `G` and the natural
/// gradients `∇Σ⁻¹ = (2F, 2E)`, using
/// `F_t = Ru_t K_t − B_tᵀ P_{t+1} A_cl,t` and `E_t = −Rw_t L_t − D_tᵀ P_{t+1} A_cl,t`.
/// These runs take millions of steps, so the general-purpose path is too slow.
struct Kernel<'a> {
    game: &'a CompactGame,
    k: Vec<Mat>,
    l: Vec<Mat>,
    p: Vec<Mat>,
    f: Vec<Mat>,
    e: Vec<Mat>,
    acl: Mat,
    tmp: Mat,
    kbuf: Mat,
    lbuf: Mat,
    objective: f64,
}

impl<'a> Kernel<'a> {
    fn new(game: &'a CompactGame, k: &GainSchedule, l: &GainSchedule) -> Self {
        let s = game.system();
        let n = s.state_dim();
        let k = k.blocks().to_vec();
        let l = l.blocks().to_vec();
        Self {
            game,
            p: s.q().to_vec(),
            f: k.iter().map(|b| Mat::zeros(b.nrows(), n)).collect(),
            e: l.iter().map(|b| Mat::zeros(b.nrows(), n)).collect(),
            acl: Mat::zeros(n, n),
            tmp: Mat::zeros(n, n),
            kbuf: Mat::zeros(s.control_dim(), n),
            lbuf: Mat::zeros(s.disturbance_dim(), n),
            k,
            l,
            objective: f64::NAN,
        }
    }

    fn eval(&mut self) -> f64 {
        let s = self.game.system();
        let horizon = self.k.len();
        self.p[horizon].copy_from(&s.q()[horizon]);
        for t in (0..horizon).rev() {
            let (kt, lt) = (&self.k[t], &self.l[t]);
            self.acl.copy_from(&s.a()[t]);
            self.acl.gemm(-1.0, &s.b()[t], kt, 1.0);
            self.acl.gemm(-1.0, &s.d()[t], lt, 1.0);
            let (head, tail) = self.p.split_at_mut(t + 1);
            self.tmp.gemm(1.0, &tail[0], &self.acl, 0.0);
            self.f[t].gemm(1.0, &s.ru()[t], kt, 0.0);
            self.f[t].gemm_tr(-1.0, &s.b()[t], &self.tmp, 1.0);
            self.e[t].gemm(-1.0, &s.rw()[t], lt, 0.0);
            self.e[t].gemm_tr(-1.0, &s.d()[t], &self.tmp, 1.0);
            let pt = &mut head[t];
            pt.copy_from(&s.q()[t]);
            pt.gemm_tr(1.0, &self.acl, &self.tmp, 1.0);
            self.kbuf.gemm(1.0, &s.ru()[t], kt, 0.0);
            pt.gemm_tr(1.0, kt, &self.kbuf, 1.0);
            self.lbuf.gemm(1.0, &s.rw()[t], lt, 0.0);
            pt.gemm_tr(-1.0, lt, &self.lbuf, 1.0);
            let n = pt.nrows();
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = 0.5 * (pt[(i, j)] + pt[(j, i)]);
                    pt[(i, j)] = v;
                    pt[(j, i)] = v;
                }
            }
        }
        let s0 = s.noise().sigma0_step();
        self.objective = self.p.iter().map(|pt| pt.dot(s0)).sum();
        self.objective
    }

    fn step_k(&mut self, alpha: f64) {
        for (kt, ft) in self.k.iter_mut().zip(&self.f) {
            kt.zip_apply(ft, |x, g| *x -= 2.0 * alpha * g);
        }
    }

    fn step_l(&mut self, eta: f64) {
        for (lt, et) in self.l.iter_mut().zip(&self.e) {
            lt.zip_apply(et, |x, g| *x += 2.0 * eta * g);
        }
    }

    fn record(&self, trace: &mut RunTrace, iter: usize, start: &Instant) {
        let norm = |v: &[Mat]| v.iter().map(|b| b.norm_squared()).sum::<f64>();
        let lambda = if self.p.iter().all(|b| b.iter().all(|x| x.is_finite())) {
            h_blocks(self.game, &BlockDiag::new(self.p.clone())).min_eig()
        } else {
            f64::NAN
        };
        trace.push(TraceRecord {
            iter,
            objective: self.objective,
            grad_norm: (norm(&self.f) + norm(&self.e)).sqrt(),
            lambda_min_h: lambda,
            ir_ok: true,
            wall_time_s: start.elapsed().as_secs_f64(),
            zo: None,
        });
    }
}

/// Runs `cfg.iters` iterations of the chosen scheme, stopping early once the
/// run blows up (or, when `stop_on_divergence`, once the growth threshold is hit).
pub fn gda_variant(
    scheme: GdaScheme,
    game: &CompactGame,
    k0: &GainSchedule,
    l0: &GainSchedule,
    cfg: &GdaConfig,
) -> Result<GdaOutcome> {
    cfg.validate()?;
    game.check_gains(k0, l0)?;
    let start = Instant::now();
    let mut ker = Kernel::new(game, k0, l0);
    let mut trace = RunTrace::new();
    let g0 = ker.eval().abs();
    if !g0.is_finite() {
        return Err(LqError::InvalidParameter("initial objective is not finite".into()));
    }
    ker.record(&mut trace, 0, &start);
    let bad = |g: f64| !g.is_finite() || g.abs() > cfg.cap;
    let mut max_abs = g0;
    let mut blew_up = false;
    let mut iterations = 0;
    for it in 1..=cfg.iters {
        iterations = it;
        let g = match scheme {
            GdaScheme::Angda => {
                ker.step_k(cfg.alpha);
                let mid = ker.eval();
                if bad(mid) {
                    mid
                } else {
                    ker.step_l(cfg.eta);
                    ker.eval()
                }
            }
            GdaScheme::TauNgda => {
                ker.step_k(cfg.alpha);
                ker.step_l(cfg.eta);
                ker.eval()
            }
            GdaScheme::DescentMultiStepAscent => {
                let mut g = ker.objective;
                for _ in 0..cfg.ascent_steps {
                    ker.step_l(cfg.eta);
                    g = ker.eval();
                    if bad(g) {
                        break;
                    }
                }
                if bad(g) {
                    g
                } else {
                    ker.step_k(cfg.alpha);
                    ker.eval()
                }
            }
        };
        if bad(g) {
            blew_up = true;
            max_abs = if g.is_finite() { max_abs.max(g.abs()) } else { f64::INFINITY };
            ker.record(&mut trace, it, &start);
            break;
        }
        max_abs = max_abs.max(g.abs());
        let hit = cfg.stop_on_divergence && max_abs >= cfg.growth_threshold * g0;
        if hit || it % cfg.record_stride == 0 || it == cfg.iters {
            ker.record(&mut trace, it, &start);
        }
        if hit {
            break;
        }
    }
    let growth = if g0 > 0.0 { max_abs / g0 } else { f64::INFINITY };
    Ok(GdaOutcome {
        trace,
        k: GainSchedule::new(k0.player(), ker.k).unwrap_or_else(|_| k0.scale(f64::NAN)),
        l: GainSchedule::new(l0.player(), ker.l).unwrap_or_else(|_| l0.scale(f64::NAN)),
        blew_up,
        growth,
        diverged: blew_up || growth >= cfg.growth_threshold,
        iterations,
    })
}

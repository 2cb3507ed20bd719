//! One-point sphere-smoothed gradient estimators and the unperturbed
//! correlation estimator.

use rayon::prelude::*;

use crate::error::{LqError, Result};
use crate::exact_opt::{solve_inner, InnerStop, LoopConfig, UpdateRule};
use crate::linalg::Mat;
use crate::lq_core::{inner_riccati, BlockDiag, CompactGame, GainSchedule};

use super::config::{ZoConfig, MIN_RADIUS};
use super::drivers::zo_inner;
use super::kernel::{unit_vector, ClosedLoop, FlatSystem, NoiseSampler, Roller};
use super::streams::Streams;

/// Samples per work item. Partial sums are combined in chunk order, so the
/// result does not depend on the thread count.
const CHUNK: usize = 256;

const TAG_PERTURBED: u64 = 1;
const TAG_UNPERTURBED: u64 = 2;
const TAG_ORACLE: u64 = 3;

#[derive(Debug, Clone)]
pub struct GradientEstimate {
    pub grad: GainSchedule,
    /// `M⁻¹ Σᵢ blockdiag(x_tⁱ x_tⁱᵀ)` from unperturbed rollouts.
    pub sigma: BlockDiag,
    /// Mean cost of the unperturbed rollouts.
    pub mean_cost: f64,
    /// Perturbed controller gains without a best response (outer only);
    /// these samples contribute zero.
    pub infeasible: usize,
}

#[derive(Default)]
struct Partial {
    grad: Vec<f64>,
    second: Vec<f64>,
    cost: f64,
    infeasible: usize,
}

impl Partial {
    fn merge(mut self, other: Partial) -> Partial {
        if self.grad.is_empty() {
            return other;
        }
        self.grad.iter_mut().zip(&other.grad).for_each(|(a, b)| *a += b);
        self.second.iter_mut().zip(&other.second).for_each(|(a, b)| *a += b);
        self.cost += other.cost;
        self.infeasible += other.infeasible;
        self
    }
}

fn reduce(parts: Vec<Partial>) -> Partial {
    parts.into_iter().fold(Partial::default(), Partial::merge)
}

fn chunks(total: usize) -> Vec<(usize, usize)> {
    (0..total).step_by(CHUNK).map(|s| (s, (s + CHUNK).min(total))).collect()
}

fn sigma_from(second: &[f64], m: usize, horizon: usize, count: usize) -> BlockDiag {
    let mm = m * m;
    BlockDiag::new(
        (0..=horizon)
            .map(|t| Mat::from_row_slice(m, m, &second[t * mm..(t + 1) * mm]) / count as f64)
            .collect(),
    )
}

fn check_radius(r: f64) -> Result<()> {
    if r.is_finite() && r >= MIN_RADIUS {
        Ok(())
    } else {
        Err(LqError::InvalidParameter(format!("smoothing radius {r} is below {MIN_RADIUS:e}")))
    }
}

/// `∇̂_L = M₁⁻¹ Σᵢ (d₁/r₁) Ḡ(K, L + r₁Uⁱ) Uⁱ` and `Σ̂` at `(K, L)`, with `cfg.m1`, `cfg.r1`.
pub fn estimate_inner(
    game: &CompactGame,
    k: &GainSchedule,
    l: &GainSchedule,
    cfg: &ZoConfig,
    streams: &Streams,
) -> Result<GradientEstimate> {
    game.check_gains(k, l)?;
    check_radius(cfg.r1)?;
    let (batch, r) = (cfg.m1.max(1), cfg.r1);
    let sys = game.system();
    let fs = FlatSystem::new(sys);
    let (kf, lf) = (k.to_flat(), l.to_flat());
    let d1 = fs.l_len();
    let mut cl0 = ClosedLoop::new(&fs);
    cl0.fill(&fs, &kf, &lf);
    let base_sampler = NoiseSampler::new(sys.noise());
    let (pert, unpert) = (streams.child(TAG_PERTURBED), streams.child(TAG_UNPERTURBED));
    let mm = fs.m * fs.m;
    let parts: Vec<Partial> = chunks(batch)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut sampler = base_sampler.clone();
            let mut roller = Roller::new(fs.m);
            let mut cl = ClosedLoop::new(&fs);
            let mut u = vec![0.0; d1];
            let mut lp = vec![0.0; d1];
            let mut part = Partial { grad: vec![0.0; d1], second: vec![0.0; (fs.horizon + 1) * mm], ..Default::default() };
            for i in lo..hi {
                let mut rng = pert.sample(i as u64);
                unit_vector(&mut rng, &mut u);
                lp.iter_mut().zip(lf.iter().zip(&u)).for_each(|(p, (a, b))| *p = a + r * b);
                cl.fill(&fs, &kf, &lp);
                let c = roller.run(&fs, &cl, &mut sampler, &mut rng, None);
                let w = d1 as f64 / r * c;
                part.grad.iter_mut().zip(&u).for_each(|(g, ui)| *g += w * ui);
                let mut rng0 = unpert.sample(i as u64);
                part.cost += roller.run(&fs, &cl0, &mut sampler, &mut rng0, Some(&mut part.second));
            }
            part
        })
        .collect();
    let total = reduce(parts);
    let grad: Vec<f64> = total.grad.iter().map(|g| g / batch as f64).collect();
    Ok(GradientEstimate {
        grad: l.from_flat_like(&grad),
        sigma: sigma_from(&total.second, fs.m, fs.horizon, batch),
        mean_cost: total.cost / batch as f64,
        infeasible: 0,
    })
}

/// How the outer estimator obtains `L̄(K)` for each perturbed gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerOracle {
    /// Exact best response from the Riccati recursion.
    Exact,
    /// Exact-gradient NPG inner loop, warm-started at `L̄(K)`, to gap `tol`.
    Npg { eta: f64, tol: f64, max_iters: usize },
    /// The zeroth-order inner loop with `cfg`'s inner parameters.
    Zo { rule: UpdateRule },
}

impl InnerOracle {
    /// `None` when `k` has no best response.
    fn solve(
        &self,
        game: &CompactGame,
        k: &GainSchedule,
        warm: &GainSchedule,
        cfg: &ZoConfig,
        streams: &Streams,
    ) -> Result<Option<GainSchedule>> {
        let star = match inner_riccati(game, k) {
            Ok(sol) => sol.l_star,
            Err(LqError::InfeasibleGain { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        match *self {
            InnerOracle::Exact => Ok(Some(star)),
            InnerOracle::Npg { eta, tol, max_iters } => {
                let lc = LoopConfig {
                    eta,
                    alpha: 1.0,
                    inner_tol: tol,
                    outer_tol: 1.0,
                    max_inner: max_iters,
                    max_outer: 0,
                    monitor_ir: false,
                    exact_inner: false,
                    inner_stop: InnerStop::Gap,
                    outer_grad_tol: None,
                };
                Ok(Some(solve_inner(UpdateRule::Npg, game, k, warm, &lc)?.l))
            }
            InnerOracle::Zo { rule } => Ok(Some(zo_inner(game, k, warm, rule, cfg, streams)?.l)),
        }
    }
}

/// `∇̂_K = M₂⁻¹ Σⱼ (d₂/r₂) Ḡ(K + r₂Vʲ, L̄(K + r₂Vʲ)) Vʲ` and `Σ̂` from
/// rollouts of `(K, L̄(K))`, with `cfg.m2`, `cfg.r2`. Also returns `L̄(K)`.
pub fn estimate_outer(
    game: &CompactGame,
    k: &GainSchedule,
    cfg: &ZoConfig,
    oracle: &InnerOracle,
    streams: &Streams,
) -> Result<(GradientEstimate, GainSchedule)> {
    game.check_k(k)?;
    check_radius(cfg.r2)?;
    let (batch, r) = (cfg.m2.max(1), cfg.r2);
    let sys = game.system();
    let fs = FlatSystem::new(sys);
    let oracle_streams = streams.child(TAG_ORACLE);
    let warm = inner_riccati(game, k)?.l_star;
    let l_bar = oracle
        .solve(game, k, &warm, cfg, &oracle_streams.child(u64::MAX))?
        .expect("feasibility checked above");
    let kf = k.to_flat();
    let d2 = fs.k_len();
    let mut cl0 = ClosedLoop::new(&fs);
    cl0.fill(&fs, &kf, &l_bar.to_flat());
    let base_sampler = NoiseSampler::new(sys.noise());
    let (pert, unpert) = (streams.child(TAG_PERTURBED), streams.child(TAG_UNPERTURBED));
    let mm = fs.m * fs.m;
    let parts: Vec<Result<Partial>> = chunks(batch)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut sampler = base_sampler.clone();
            let mut roller = Roller::new(fs.m);
            let mut cl = ClosedLoop::new(&fs);
            let mut v = vec![0.0; d2];
            let mut kp = vec![0.0; d2];
            let mut part = Partial { grad: vec![0.0; d2], second: vec![0.0; (fs.horizon + 1) * mm], ..Default::default() };
            for j in lo..hi {
                let mut rng = pert.sample(j as u64);
                unit_vector(&mut rng, &mut v);
                kp.iter_mut().zip(kf.iter().zip(&v)).for_each(|(p, (a, b))| *p = a + r * b);
                let kj = k.from_flat_like(&kp);
                match oracle.solve(game, &kj, &l_bar, cfg, &oracle_streams.child(j as u64))? {
                    Some(lj) => {
                        cl.fill(&fs, &kp, &lj.to_flat());
                        let c = roller.run(&fs, &cl, &mut sampler, &mut rng, None);
                        let w = d2 as f64 / r * c;
                        part.grad.iter_mut().zip(&v).for_each(|(g, vi)| *g += w * vi);
                    }
                    None => part.infeasible += 1,
                }
                let mut rng0 = unpert.sample(j as u64);
                part.cost += roller.run(&fs, &cl0, &mut sampler, &mut rng0, Some(&mut part.second));
            }
            Ok(part)
        })
        .collect();
    let total = reduce(parts.into_iter().collect::<Result<Vec<_>>>()?);
    let grad: Vec<f64> = total.grad.iter().map(|g| g / batch as f64).collect();
    Ok((
        GradientEstimate {
            grad: k.from_flat_like(&grad),
            sigma: sigma_from(&total.second, fs.m, fs.horizon, batch),
            mean_cost: total.cost / batch as f64,
            infeasible: total.infeasible,
        },
        l_bar,
    ))
}

//! Perturbation and noise sampling, and single trajectory rollouts.

use rand::Rng;

use crate::error::{LqError, Result};
use crate::linalg::Vector;
use crate::lq_core::{GainSchedule, NoiseModel, Player, TimeVaryingSystem};

use super::kernel::{unit_vector, NoiseSampler};

/// Uniform draw from the unit Frobenius sphere of the gain pattern.
pub fn sample_unit_perturbation<R: Rng + ?Sized>(
    player: Player,
    rows: usize,
    state_dim: usize,
    horizon: usize,
    rng: &mut R,
) -> GainSchedule {
    let mut flat = vec![0.0; rows * state_dim * horizon];
    unit_vector(rng, &mut flat);
    GainSchedule::zeros(player, rows, state_dim, horizon).from_flat_like(&flat)
}

/// Initial state and the `N` process-noise vectors of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub x0: Vector,
    pub xi: Vec<Vector>,
}

impl NoiseDraw {
    /// All-zero draw (deterministic trajectory from `x0`).
    pub fn deterministic(x0: Vector, horizon: usize) -> Self {
        let m = x0.len();
        Self { x0, xi: vec![Vector::zeros(m); horizon] }
    }
}

pub fn draw_noise<R: Rng + ?Sized>(noise: &NoiseModel, horizon: usize, rng: &mut R) -> NoiseDraw {
    let mut sampler = NoiseSampler::new(noise);
    let m = noise.dim();
    let mut buf = vec![0.0; m];
    let mut next = |rng: &mut R| {
        sampler.draw(rng, &mut buf);
        Vector::from_column_slice(&buf)
    };
    let x0 = next(rng);
    let xi = (0..horizon).map(|_| next(rng)).collect();
    NoiseDraw { x0, xi }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub states: Vec<Vector>,
    pub costs: Vec<f64>,
    pub total: f64,
}

/// `x_{t+1} = (A_t − B_tK_t − D_tL_t) x_t + ξ_t` with stage costs
/// `x_tᵀ(Q_t + K_tᵀRᵘK_t − L_tᵀRʷL_t)x_t` and terminal `x_Nᵀ Q_N x_N`.
pub fn rollout(sys: &TimeVaryingSystem, k: &GainSchedule, l: &GainSchedule, draw: &NoiseDraw) -> Result<Rollout> {
    let n = sys.horizon();
    if k.horizon() != n || l.horizon() != n || draw.xi.len() != n || draw.x0.len() != sys.state_dim() {
        return Err(LqError::Dimension("rollout inputs do not match the system".into()));
    }
    let mut states = Vec::with_capacity(n + 1);
    let mut costs = Vec::with_capacity(n + 1);
    let mut x = draw.x0.clone();
    for t in 0..n {
        let (kt, lt) = (k.block(t), l.block(t));
        let w = &sys.q()[t] + kt.transpose() * &sys.ru()[t] * kt - lt.transpose() * &sys.rw()[t] * lt;
        costs.push(x.dot(&(&w * &x)));
        let next = (&sys.a()[t] - &sys.b()[t] * kt - &sys.d()[t] * lt) * &x + &draw.xi[t];
        states.push(std::mem::replace(&mut x, next));
    }
    costs.push(x.dot(&(&sys.q()[n] * &x)));
    states.push(x);
    let total = costs.iter().sum();
    Ok(Rollout { states, costs, total })
}

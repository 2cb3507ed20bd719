//! Lyapunov recursions, objective and exact policy gradients for fixed `(K, L)`.

use crate::error::Result;
use crate::linalg::{symmetrize, Mat};

use super::compact::CompactGame;
use super::gains::{BlockDiag, GainSchedule, Player};

fn closed_loop_step(game: &CompactGame, k: &GainSchedule, l: &GainSchedule, t: usize) -> Mat {
    let s = game.system();
    &s.a()[t] - &s.b()[t] * k.block(t) - &s.d()[t] * l.block(t)
}

/// `P_{K,L}` by the backward Lyapunov recursion (`N+1` blocks).
pub fn value_matrix(game: &CompactGame, k: &GainSchedule, l: &GainSchedule) -> BlockDiag {
    let s = game.system();
    let n = game.horizon();
    let mut p = vec![Mat::zeros(0, 0); n + 1];
    p[n] = s.q()[n].clone();
    for t in (0..n).rev() {
        let acl = closed_loop_step(game, k, l, t);
        let (kt, lt) = (k.block(t), l.block(t));
        let next = acl.transpose() * &p[t + 1] * &acl + &s.q()[t] + kt.transpose() * &s.ru()[t] * kt
            - lt.transpose() * &s.rw()[t] * lt;
        p[t] = symmetrize(&next);
    }
    BlockDiag::new(p)
}

/// `Σ_{K,L}` by the forward recursion `Σ_{t+1} = A_cl Σ_t A_clᵀ + Σ₀`.
pub fn correlation_matrix(game: &CompactGame, k: &GainSchedule, l: &GainSchedule) -> BlockDiag {
    let n = game.horizon();
    let s0 = game.system().noise().sigma0_step();
    let mut sig = Vec::with_capacity(n + 1);
    sig.push(s0.clone());
    for t in 0..n {
        let acl = closed_loop_step(game, k, l, t);
        let next = &acl * &sig[t] * acl.transpose() + s0;
        sig.push(symmetrize(&next));
    }
    BlockDiag::new(sig)
}

/// `G(K, L) = Tr(P_{K,L} Σ₀)`.
pub fn objective(game: &CompactGame, k: &GainSchedule, l: &GainSchedule) -> f64 {
    objective_from_value(game, &value_matrix(game, k, l))
}

pub(crate) fn objective_from_value(game: &CompactGame, p: &BlockDiag) -> f64 {
    let s0 = game.system().noise().sigma0_step();
    p.blocks.iter().map(|pt| pt.component_mul(s0).sum()).sum()
}

/// Policy gradients and their natural-gradient factors.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub grad_k: GainSchedule,
    pub grad_l: GainSchedule,
    /// `F = (𝐑ᵘ + 𝐁ᵀ𝐏𝐁)𝐊 − 𝐁ᵀ𝐏(𝐀 − 𝐃𝐋)`, so that `∇_K = 2FΣ`.
    pub f: GainSchedule,
    /// `E = (−𝐑ʷ + 𝐃ᵀ𝐏𝐃)𝐋 − 𝐃ᵀ𝐏(𝐀 − 𝐁𝐊)`, so that `∇_L = 2EΣ`.
    pub e: GainSchedule,
}

pub fn gradients(game: &CompactGame, k: &GainSchedule, l: &GainSchedule) -> Gradients {
    let p = value_matrix(game, k, l);
    let sigma = correlation_matrix(game, k, l);
    gradients_from(game, k, l, &p, &sigma)
}

/// `(F, E)` at `(K, L)` given `P_{K,L}`.
pub fn natural_factors(game: &CompactGame, k: &GainSchedule, l: &GainSchedule, p: &BlockDiag) -> (GainSchedule, GainSchedule) {
    let s = game.system();
    let mut f = Vec::with_capacity(game.horizon());
    let mut e = Vec::with_capacity(game.horizon());
    for t in 0..game.horizon() {
        let (a, b, d) = (&s.a()[t], &s.b()[t], &s.d()[t]);
        let (kt, lt) = (k.block(t), l.block(t));
        let pn = &p.blocks[t + 1];
        let btp = b.transpose() * pn;
        let dtp = d.transpose() * pn;
        f.push((&s.ru()[t] + &btp * b) * kt - &btp * (a - d * lt));
        e.push((&dtp * d - &s.rw()[t]) * lt - &dtp * (a - b * kt));
    }
    let f = GainSchedule::new(Player::Controller, f).unwrap_or_else(|_| non_finite(Player::Controller, k));
    let e = GainSchedule::new(Player::Disturbance, e).unwrap_or_else(|_| non_finite(Player::Disturbance, l));
    (f, e)
}

pub(crate) fn gradients_from(
    game: &CompactGame,
    k: &GainSchedule,
    l: &GainSchedule,
    p: &BlockDiag,
    sigma: &BlockDiag,
) -> Gradients {
    let (f, e) = natural_factors(game, k, l, p);
    let grad_k = f.map_blocks(|t, ft| ft * &sigma.blocks[t] * 2.0);
    let grad_l = e.map_blocks(|t, et| et * &sigma.blocks[t] * 2.0);
    Gradients { grad_k, grad_l, f, e }
}

/// Placeholder used when a divergent iterate produces non-finite blocks.
fn non_finite(player: Player, like: &GainSchedule) -> GainSchedule {
    GainSchedule::zeros(player, like.rows(), like.state_dim(), like.horizon()).map_blocks(|_, b| b.map(|_| f64::NAN))
}

/// `P_{K,L}` from the lifted fixed point `𝐏 = 𝐀_clᵀ𝐏𝐀_cl + 𝐐 + 𝐊ᵀ𝐑ᵘ𝐊 − 𝐋ᵀ𝐑ʷ𝐋`,
/// summed as a finite series (the closed loop is nilpotent).
pub fn compact_value_matrix(game: &CompactGame, k: &GainSchedule, l: &GainSchedule) -> Mat {
    let acl = game.closed_loop(k, l);
    let (kc, lc) = (k.to_compact(), l.to_compact());
    let stage = &game.block_q + kc.transpose() * &game.block_ru * &kc - lc.transpose() * &game.block_rw * &lc;
    let mut term = stage.clone();
    let mut total = stage;
    for _ in 0..game.horizon() {
        term = acl.transpose() * &term * &acl;
        total += &term;
    }
    symmetrize(&total)
}

/// `Σ₀ + Σ_{t≥1} 𝐀_cl^t Σ₀ (𝐀_cl^t)ᵀ` on the lifted matrices.
pub fn compact_correlation_matrix(game: &CompactGame, k: &GainSchedule, l: &GainSchedule) -> Mat {
    let acl = game.closed_loop(k, l);
    let mut total = game.sigma0.clone();
    let mut pow = Mat::identity(acl.nrows(), acl.ncols());
    for _ in 0..game.horizon() {
        pow = &acl * pow;
        total += &pow * &game.sigma0 * pow.transpose();
    }
    symmetrize(&total)
}

/// Gradients evaluated on the lifted matrices; off-pattern entries are
/// checked to vanish before projecting back onto the block pattern.
pub fn compact_gradients(game: &CompactGame, k: &GainSchedule, l: &GainSchedule) -> Result<Gradients> {
    let p = compact_value_matrix(game, k, l);
    let sigma = compact_correlation_matrix(game, k, l);
    let (kc, lc) = (k.to_compact(), l.to_compact());
    let (a, b, d) = (&game.block_a, &game.block_b, &game.block_d);
    let f = (&game.block_ru + b.transpose() * &p * b) * &kc - b.transpose() * &p * (a - d * &lc);
    let e = (d.transpose() * &p * d - &game.block_rw) * &lc - d.transpose() * &p * (a - b * &kc);
    let (m, n) = (game.state_dim(), game.horizon());
    let (du, dw) = (game.control_dim(), game.disturbance_dim());
    Ok(Gradients {
        grad_k: GainSchedule::from_compact(Player::Controller, &(&f * &sigma * 2.0), du, m, n)?,
        grad_l: GainSchedule::from_compact(Player::Disturbance, &(&e * &sigma * 2.0), dw, m, n)?,
        f: GainSchedule::from_compact(Player::Controller, &f, du, m, n)?,
        e: GainSchedule::from_compact(Player::Disturbance, &e, dw, m, n)?,
    })
}

/// Everything the first-order methods need at one point `(K, L)`.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub p: BlockDiag,
    pub sigma: BlockDiag,
    pub objective: f64,
    pub grads: Gradients,
}

pub fn evaluate(game: &CompactGame, k: &GainSchedule, l: &GainSchedule) -> Evaluation {
    let p = value_matrix(game, k, l);
    let sigma = correlation_matrix(game, k, l);
    let objective = objective_from_value(game, &p);
    let grads = gradients_from(game, k, l, &p, &sigma);
    Evaluation { p, sigma, objective, grads }
}

/// `H_{K,L} = 𝐑ʷ − 𝐃ᵀ𝐏_{K,L}𝐃`, per step.
pub fn h_blocks(game: &CompactGame, p: &BlockDiag) -> BlockDiag {
    let s = game.system();
    BlockDiag::new(
        (0..game.horizon())
            .map(|t| symmetrize(&(&s.rw()[t] - s.d()[t].transpose() * &p.blocks[t + 1] * &s.d()[t])))
            .collect(),
    )
}

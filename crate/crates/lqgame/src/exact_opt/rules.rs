//! PG / NPG / Gauss–Newton update rules for both players and the stepsize
//! bounds under which they are monotone.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{LqError, Result};
use crate::linalg::{spd_solve, Mat};
use crate::lq_core::{
    correlation_matrix, evaluate, gradients_from, h_blocks, inner_riccati, smoothness_probe, BlockDiag, CompactGame,
    Evaluation, GainSchedule,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UpdateRule {
    Pg,
    Npg,
    Gn,
}

impl FromStr for UpdateRule {
    type Err = LqError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pg" => Ok(Self::Pg),
            "npg" => Ok(Self::Npg),
            "gn" => Ok(Self::Gn),
            other => Err(LqError::InvalidParameter(format!("unknown update rule `{other}`"))),
        }
    }
}

impl fmt::Display for UpdateRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pg => "pg",
            Self::Npg => "npg",
            Self::Gn => "gn",
        })
    }
}

/// `grad_t Σ_t⁻¹`, blockwise.
pub(crate) fn right_solve_sigma(grad: &GainSchedule, sigma: &BlockDiag) -> Result<GainSchedule> {
    let mut out = Vec::with_capacity(grad.horizon());
    for (t, g) in grad.blocks().iter().enumerate() {
        let x = spd_solve(&sigma.blocks[t], &g.transpose())
            .ok_or_else(|| LqError::SingularMatrix(format!("Sigma_{t}")))?;
        out.push(x.transpose());
    }
    GainSchedule::new(grad.player(), out)
}

/// `M_t⁻¹ x_t`, blockwise.
pub(crate) fn left_solve(blocks: &[Mat], x: &GainSchedule, what: &str) -> Result<GainSchedule> {
    let mut out = Vec::with_capacity(x.horizon());
    for (t, xt) in x.blocks().iter().enumerate() {
        out.push(spd_solve(&blocks[t], xt).ok_or_else(|| LqError::SingularMatrix(format!("{what}_{t}")))?);
    }
    GainSchedule::new(x.player(), out)
}

/// Ascent direction for the disturbance at `(K, L)` (before scaling by `η`).
pub(crate) fn inner_direction(rule: UpdateRule, game: &CompactGame, ev: &Evaluation) -> Result<GainSchedule> {
    let g = &ev.grads.grad_l;
    match rule {
        UpdateRule::Pg => Ok(g.clone()),
        UpdateRule::Npg => right_solve_sigma(g, &ev.sigma),
        UpdateRule::Gn => {
            let nat = right_solve_sigma(g, &ev.sigma)?;
            left_solve(&h_blocks(game, &ev.p).blocks, &nat, "H")
        }
    }
}

/// One inner step: `L + η ∇_L`, `L + η ∇_L Σ⁻¹` or `L + η H⁻¹ ∇_L Σ⁻¹`.
pub fn inner_update(rule: UpdateRule, game: &CompactGame, k: &GainSchedule, l: &GainSchedule, eta: f64) -> Result<GainSchedule> {
    game.check_gains(k, l)?;
    let ev = evaluate(game, k, l);
    Ok(l.axpy(eta, &inner_direction(rule, game, &ev)?))
}

/// Descent direction for the controller given the disturbance `l`; `g` are
/// the blocks `R^u + Bᵀ P̃ B` used by Gauss–Newton.
pub(crate) fn outer_direction(
    rule: UpdateRule,
    game: &CompactGame,
    k: &GainSchedule,
    l: &GainSchedule,
    p: &BlockDiag,
    g: &BlockDiag,
) -> Result<GainSchedule> {
    let sigma = correlation_matrix(game, k, l);
    let grads = gradients_from(game, k, l, p, &sigma);
    match rule {
        UpdateRule::Pg => Ok(grads.grad_k),
        UpdateRule::Npg => right_solve_sigma(&grads.grad_k, &sigma),
        UpdateRule::Gn => {
            let nat = right_solve_sigma(&grads.grad_k, &sigma)?;
            left_solve(&g.blocks, &nat, "G")
        }
    }
}

/// One outer step at the exact best response `L(K)`.
pub fn outer_update(rule: UpdateRule, game: &CompactGame, k: &GainSchedule, alpha: f64) -> Result<GainSchedule> {
    let sol = inner_riccati(game, k)?;
    let dir = outer_direction(rule, game, k, &sol.l_star, &sol.p, &sol.g)?;
    Ok(k.axpy(-alpha, &dir))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerBounds {
    pub npg: f64,
    pub gn: f64,
    pub pg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterBounds {
    pub npg: f64,
    pub gn: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepsizeBounds {
    pub inner: InnerBounds,
    pub outer: OuterBounds,
}

impl StepsizeBounds {
    pub fn inner(&self, rule: UpdateRule) -> f64 {
        match rule {
            UpdateRule::Pg => self.inner.pg,
            UpdateRule::Npg => self.inner.npg,
            UpdateRule::Gn => self.inner.gn,
        }
    }

    /// `None` for PG, whose outer stepsize has no closed-form bound here.
    pub fn outer(&self, rule: UpdateRule) -> Option<f64> {
        match rule {
            UpdateRule::Pg => None,
            UpdateRule::Npg => Some(self.outer.npg),
            UpdateRule::Gn => Some(self.outer.gn),
        }
    }
}

/// Radius and sample count of the Lipschitz probe behind the PG bound.
pub const PROBE_RADIUS: f64 = 1e-3;
pub const PROBE_SAMPLES: usize = 32;

/// Admissible stepsizes at `(K, L0)`. The PG inner bound is the reciprocal of
/// a seeded [`smoothness_probe`].
pub fn stepsize_bounds(game: &CompactGame, k: &GainSchedule, l0: &GainSchedule, seed: u64) -> Result<StepsizeBounds> {
    let sol = inner_riccati(game, k)?;
    game.check_gains(k, l0)?;
    let ev = evaluate(game, k, l0);
    let h_norm = h_blocks(game, &ev.p).spectral_norm();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let psi = smoothness_probe(game, k, l0, PROBE_RADIUS, PROBE_SAMPLES, &mut rng);
    Ok(StepsizeBounds {
        inner: InnerBounds { npg: 1.0 / (2.0 * h_norm), gn: 0.5, pg: 1.0 / psi },
        outer: OuterBounds { npg: 1.0 / (2.0 * sol.g.spectral_norm()), gn: 0.5 },
    })
}

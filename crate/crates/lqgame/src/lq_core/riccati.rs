//! Inner best-response Riccati recursion, the saddle-point (GRDE) solver and
//! landscape constants derived from them.

use rand::Rng;

use crate::error::{LqError, Result};
use crate::linalg::{inverse_condition, lu_solve, min_eig, spd_solve, symmetrize, Mat, TOL_FEAS, TOL_PSD};

use super::compact::CompactGame;
use super::gains::{BlockDiag, GainSchedule, Player};
use super::recursions::{correlation_matrix, gradients, objective_from_value};
use super::system::TimeVaryingSystem;

/// Best response `L(K)` and the outer-loop quantities at `(K, L(K))`.
/// Obtaining one is the feasibility certificate `K ∈ 𝒦`.
#[derive(Debug, Clone)]
pub struct InnerSolution {
    /// `P_{K,L(K)}`, `N+1` blocks.
    pub p: BlockDiag,
    pub l_star: GainSchedule,
    /// `H_t = R^w_t − D_tᵀ P_{t+1} D_t`, `N` blocks.
    pub h: BlockDiag,
    /// `P̃`, `N+1` blocks; block `t+1` is `P_{t+1} + P_{t+1}D_t H_t⁻¹ D_tᵀ P_{t+1}`, block 0 is `P_0`.
    pub p_tilde: BlockDiag,
    /// `G_t = R^u_t + B_tᵀ P̃_{t+1} B_t`, `N` blocks.
    pub g: BlockDiag,
    pub lambda_min_h: f64,
    /// `G(K, L(K))`.
    pub objective: f64,
}

pub fn inner_riccati(game: &CompactGame, k: &GainSchedule) -> Result<InnerSolution> {
    game.check_k(k)?;
    let s = game.system();
    let n = game.horizon();
    let mut p = vec![Mat::zeros(0, 0); n + 1];
    let mut pt = vec![Mat::zeros(0, 0); n + 1];
    let mut h = vec![Mat::zeros(0, 0); n];
    let mut g = vec![Mat::zeros(0, 0); n];
    let mut l = vec![Mat::zeros(0, 0); n];
    p[n] = s.q()[n].clone();
    let mut lambda_min_h = f64::INFINITY;
    for t in (0..n).rev() {
        let (a, b, d) = (&s.a()[t], &s.b()[t], &s.d()[t]);
        let kt = k.block(t);
        let pn = &p[t + 1];
        let ht = symmetrize(&(&s.rw()[t] - d.transpose() * pn * d));
        let lam = min_eig(&ht);
        if !(lam > TOL_FEAS) {
            return Err(LqError::InfeasibleGain { step: t, eigenvalue: lam });
        }
        lambda_min_h = lambda_min_h.min(lam);
        let dtp = d.transpose() * pn;
        let hinv_dtp = spd_solve(&ht, &dtp).ok_or(LqError::InfeasibleGain { step: t, eigenvalue: lam })?;
        let ptn = symmetrize(&(pn + dtp.transpose() * &hinv_dtp));
        let abk = a - b * kt;
        l[t] = -(&hinv_dtp * &abk);
        let pnew = symmetrize(&(&s.q()[t] + kt.transpose() * &s.ru()[t] * kt + abk.transpose() * &ptn * &abk));
        let pmin = min_eig(&pnew);
        if !(pmin >= -TOL_PSD) {
            return Err(LqError::InfeasibleGain { step: t, eigenvalue: pmin });
        }
        g[t] = symmetrize(&(&s.ru()[t] + b.transpose() * &ptn * b));
        h[t] = ht;
        pt[t + 1] = ptn;
        p[t] = pnew;
    }
    pt[0] = p[0].clone();
    let p = BlockDiag::new(p);
    let objective = objective_from_value(game, &p);
    Ok(InnerSolution {
        p,
        l_star: GainSchedule::new(Player::Disturbance, l)?,
        h: BlockDiag::new(h),
        p_tilde: BlockDiag::new(pt),
        g: BlockDiag::new(g),
        lambda_min_h,
        objective,
    })
}

impl InnerSolution {
    /// Natural outer gradient at `(K, L(K))`: `G_t K_t − B_tᵀ P̃_{t+1} A_t`.
    pub fn outer_f(&self, game: &CompactGame, k: &GainSchedule) -> GainSchedule {
        let s = game.system();
        k.map_blocks(|t, kt| &self.g.blocks[t] * kt - s.b()[t].transpose() * &self.p_tilde.blocks[t + 1] * &s.a()[t])
    }
}

/// Saddle-point solution of the game.
#[derive(Debug, Clone)]
pub struct NashSolution {
    pub p_star: Vec<Mat>,
    pub k_star: GainSchedule,
    pub l_star: GainSchedule,
    pub lambda: Vec<Mat>,
    /// `R^w_t − D_tᵀ P*_{t+1} D_t ≻ 0` for every `t` and all `P*_t ⪰ 0`.
    pub assumption_ok: bool,
    /// Smallest `λ_min(R^w_t − D_tᵀ P*_{t+1} D_t)` and the step attaining it.
    pub assumption_margin: f64,
    pub assumption_step: usize,
}

pub fn grde(sys: &TimeVaryingSystem) -> Result<NashSolution> {
    let n = sys.horizon();
    let m = sys.state_dim();
    let mut p = vec![Mat::zeros(0, 0); n + 1];
    let mut lambda = vec![Mat::zeros(0, 0); n];
    let mut ks = vec![Mat::zeros(0, 0); n];
    let mut ls = vec![Mat::zeros(0, 0); n];
    p[n] = sys.q()[n].clone();
    let mut margin = f64::INFINITY;
    let mut margin_step = 0;
    let mut psd = min_eig(&p[n]) >= -TOL_PSD;
    for t in (0..n).rev() {
        let (a, b, d) = (&sys.a()[t], &sys.b()[t], &sys.d()[t]);
        let pn = &p[t + 1];
        let ru_bt = spd_solve(&sys.ru()[t], &b.transpose()).ok_or(LqError::SingularMatrix(format!("Ru_{t}")))?;
        let rw_dt = spd_solve(&sys.rw()[t], &d.transpose()).ok_or(LqError::SingularMatrix(format!("Rw_{t}")))?;
        let lam = Mat::identity(m, m) + (b * &ru_bt - d * &rw_dt) * pn;
        if inverse_condition(&lam) <= TOL_FEAS {
            return Err(LqError::SingularLambda { step: t });
        }
        let x = lu_solve(&lam, a).ok_or(LqError::SingularLambda { step: t })?;
        ks[t] = &ru_bt * pn * &x;
        ls[t] = -(&rw_dt * pn * &x);
        let h = symmetrize(&(&sys.rw()[t] - d.transpose() * pn * d));
        let hmin = min_eig(&h);
        if hmin < margin {
            margin = hmin;
            margin_step = t;
        }
        let pnew = symmetrize(&(&sys.q()[t] + a.transpose() * pn * &x));
        psd &= min_eig(&pnew) >= -TOL_PSD;
        p[t] = pnew;
        lambda[t] = lam;
    }
    Ok(NashSolution {
        p_star: p,
        k_star: GainSchedule::new(Player::Controller, ks)?,
        l_star: GainSchedule::new(Player::Disturbance, ls)?,
        lambda,
        assumption_ok: margin > TOL_FEAS && psd,
        assumption_margin: margin,
        assumption_step: margin_step,
    })
}

impl NashSolution {
    /// Converts a failed assumption check into an error.
    pub fn require_assumption(self) -> Result<Self> {
        if self.assumption_ok {
            Ok(self)
        } else {
            Err(LqError::AssumptionViolated { step: self.assumption_step, eigenvalue: self.assumption_margin })
        }
    }
}

/// PL constant of the inner problem at `K`: `4 λ_min(H) φ² / ‖Σ_{K,L(K)}‖`.
pub fn pl_constant(game: &CompactGame, k: &GainSchedule) -> Result<f64> {
    let sol = inner_riccati(game, k)?;
    let sigma = correlation_matrix(game, k, &sol.l_star);
    let phi = game.phi();
    Ok(4.0 * sol.lambda_min_h * phi * phi / sigma.spectral_norm())
}

/// Empirical Lipschitz constant of `∇_L G(K, ·)` around `L`: the largest
/// `‖∇_L G(K, L + rU) − ∇_L G(K, L)‖_F / r` over random unit directions `U`.
pub fn smoothness_probe<R: Rng + ?Sized>(
    game: &CompactGame,
    k: &GainSchedule,
    l: &GainSchedule,
    radius: f64,
    samples: usize,
    rng: &mut R,
) -> f64 {
    assert!(radius > 0.0, "probe radius must be positive");
    let base = gradients(game, k, l).grad_l;
    (0..samples.max(1))
        .map(|_| {
            let u = GainSchedule::random_unit(Player::Disturbance, l.rows(), l.state_dim(), l.horizon(), rng);
            let g = gradients(game, k, &l.axpy(radius, &u)).grad_l;
            g.sub(&base).norm() / radius
        })
        .fold(0.0, f64::max)
}

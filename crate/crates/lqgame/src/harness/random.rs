//! Seeded random problem instances for property sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::equiv::{da_rde, leqg_rde, DaSystem, LeqgSystem};
use crate::linalg::{min_eig, spd_inverse, symmetrize, Mat};
use crate::lq_core::{grde, inner_riccati, objective, CompactGame, GainSchedule, NoiseModel, Player, TimeVaryingSystem};

#[derive(Debug, Clone, Copy)]
pub struct RandomShape {
    pub horizon: usize,
    pub m: usize,
    pub d: usize,
    pub n: usize,
}

fn gauss(rng: &mut impl Rng, r: usize, c: usize, s: f64) -> Mat {
    Mat::from_fn(r, c, |_, _| s * rng.sample::<f64, _>(StandardNormal))
}

fn spd(rng: &mut impl Rng, k: usize, floor: f64) -> Mat {
    let x = gauss(rng, k, k, 0.5);
    symmetrize(&(&x * x.transpose() + Mat::identity(k, k) * floor))
}

/// Random time-varying game whose `R^w = c·I` is scaled up until the
/// saddle-point assumption holds with margin at least `c/4`.
pub fn random_system(seed: u64, shape: RandomShape) -> TimeVaryingSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let RandomShape { horizon, m, d, n } = shape;
    let a: Vec<Mat> = (0..horizon).map(|_| gauss(&mut rng, m, m, 0.6)).collect();
    let b: Vec<Mat> = (0..horizon).map(|_| gauss(&mut rng, m, d, 0.7)).collect();
    let dd: Vec<Mat> = (0..horizon).map(|_| gauss(&mut rng, m, n, 0.4)).collect();
    let q: Vec<Mat> = (0..=horizon).map(|_| spd(&mut rng, m, 0.2)).collect();
    let ru: Vec<Mat> = (0..horizon).map(|_| spd(&mut rng, d, 0.5)).collect();
    let sig = spd(&mut rng, m, 0.3);
    let noise = NoiseModel::sphere(sig).expect("spd by construction");
    let mut c = 1.0;
    loop {
        let sys = TimeVaryingSystem::new(
            a.clone(),
            b.clone(),
            dd.clone(),
            q.clone(),
            ru.clone(),
            vec![Mat::identity(n, n) * c; horizon],
            noise.clone(),
        )
        .expect("valid by construction");
        if let Ok(nash) = grde(&sys) {
            if nash.assumption_ok && nash.assumption_margin >= 0.25 * c {
                return sys;
            }
        }
        c *= 1.5;
    }
}

/// Controller gain obtained by perturbing the Nash gain until it stays in 𝒦.
pub fn random_feasible_k(game: &CompactGame, seed: u64, scale: f64) -> GainSchedule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let kstar = grde(game.system()).expect("nonsingular").k_star;
    let mut s = scale;
    loop {
        let dir = GainSchedule::random_unit(Player::Controller, kstar.rows(), kstar.state_dim(), kstar.horizon(), &mut rng);
        let k = kstar.axpy(s * kstar.norm().max(1.0), &dir);
        if inner_riccati(game, &k).is_ok() {
            return k;
        }
        s *= 0.5;
    }
}

/// Arbitrary disturbance gain of moderate size.
pub fn random_l(game: &CompactGame, seed: u64, scale: f64) -> GainSchedule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5851_f42d_4c95_7f2d);
    let u = GainSchedule::random_unit(Player::Disturbance, game.disturbance_dim(), game.state_dim(), game.horizon(), &mut rng);
    u.scale(scale)
}

/// Well-conditioned point for checking the zeroth-order estimators.
///
/// `K = K* + sV` with `s` shrunk from `4·max(1, ‖K*‖)` until
/// `λ_min(H) ≥ λ_min(H(K*))/2`, so the smoothing ball stays deep inside 𝒦;
/// `L = L(K) + s'U` with `s'` chosen so that `G(K, L) = 0`, which minimises
/// the one-point estimator's second moment along that ray.
pub fn estimator_probe_point(game: &CompactGame, seed: u64) -> (GainSchedule, GainSchedule) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x2545_f491_4f6c_dd1d);
    let kstar = grde(game.system()).expect("nonsingular").k_star;
    let floor = 0.5 * inner_riccati(game, &kstar).expect("Nash gain is feasible").lambda_min_h;
    let v = GainSchedule::random_unit(Player::Controller, kstar.rows(), kstar.state_dim(), kstar.horizon(), &mut rng);
    let mut s = 4.0 * kstar.norm().max(1.0);
    let (k, sol) = loop {
        let k = kstar.axpy(s, &v);
        if let Ok(sol) = inner_riccati(game, &k) {
            if sol.lambda_min_h >= floor {
                break (k, sol);
            }
        }
        s *= 0.8;
    };
    let u = GainSchedule::random_unit(Player::Disturbance, game.disturbance_dim(), game.state_dim(), game.horizon(), &mut rng);
    let g = |s: f64| objective(game, &k, &sol.l_star.axpy(s, &u));
    let (mut lo, mut hi) = (0.0, 1.0);
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let l = sol.l_star.axpy(lo, &u);
    (k, l)
}

/// Random LEQG problem whose `β = 1/c` is shrunk until the mapped game's
/// assumption margin is at least `c/4` and `X₀⁻¹ − βP₀* ⪰ λ_min(X₀⁻¹)/4`.
/// `shape.n` is ignored (the disturbance enters through `W^{1/2}`).
pub fn random_leqg(seed: u64, shape: RandomShape) -> LeqgSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1f83_d9ab_fb41_bd6b);
    let RandomShape { horizon, m, d, .. } = shape;
    let a: Vec<Mat> = (0..horizon).map(|_| gauss(&mut rng, m, m, 0.6)).collect();
    let b: Vec<Mat> = (0..horizon).map(|_| gauss(&mut rng, m, d, 0.7)).collect();
    let q: Vec<Mat> = (0..=horizon).map(|_| spd(&mut rng, m, 0.2)).collect();
    let r: Vec<Mat> = (0..horizon).map(|_| spd(&mut rng, d, 0.5)).collect();
    let w = spd(&mut rng, m, 0.3);
    let x0 = spd(&mut rng, m, 0.3);
    let x0_inv = spd_inverse(&x0).expect("spd by construction");
    let floor = 0.25 * min_eig(&x0_inv);
    let mut c = 1.0;
    loop {
        let sys = LeqgSystem::new(a.clone(), b.clone(), q.clone(), r.clone(), w.clone(), x0.clone(), 1.0 / c)
            .expect("valid by construction");
        if let Ok(nash) = grde(&sys.to_game()) {
            let init = min_eig(&(&x0_inv - &nash.p_star[0] / c));
            if nash.assumption_ok && nash.assumption_margin >= 0.25 * c && init >= floor {
                return sys;
            }
        }
        c *= 1.5;
    }
}

/// Random attenuation problem with `C_t = [Q_t^{1/2}; 0]`, `E_t = [0; R_t^{1/2}]`,
/// and `γ²` grown until both the game assumption and `γ²I − P₀*` have
/// margin at least `γ²/4`.
pub fn random_da(seed: u64, shape: RandomShape) -> DaSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6a09_e667_f3bc_c908);
    let RandomShape { horizon, m, d, n } = shape;
    let a: Vec<Mat> = (0..horizon).map(|_| gauss(&mut rng, m, m, 0.6)).collect();
    let b: Vec<Mat> = (0..horizon).map(|_| gauss(&mut rng, m, d, 0.7)).collect();
    let dd: Vec<Mat> = (0..horizon).map(|_| gauss(&mut rng, m, n, 0.4)).collect();
    let q: Vec<Mat> = (0..=horizon).map(|_| spd(&mut rng, m, 0.2)).collect();
    let ru: Vec<Mat> = (0..horizon).map(|_| spd(&mut rng, d, 0.5)).collect();
    let noise = NoiseModel::isotropic(m, 1.0).expect("identity");
    let mut g2 = 1.0;
    loop {
        let game = TimeVaryingSystem::new(
            a.clone(),
            b.clone(),
            dd.clone(),
            q.clone(),
            ru.clone(),
            vec![Mat::identity(n, n) * g2; horizon],
            noise.clone(),
        )
        .expect("valid by construction");
        if let Ok(nash) = grde(&game) {
            let init = min_eig(&(Mat::identity(m, m) * g2 - &nash.p_star[0]));
            if nash.assumption_ok && nash.assumption_margin >= 0.25 * g2 && init >= 0.25 * g2 {
                return DaSystem::from_game(&game).expect("normalised by construction");
            }
        }
        g2 *= 1.5;
    }
}

/// `K* + sV` for a random unit `V`, halving `s` from `scale·max(1, ‖K*‖)`
/// until `feasible` accepts the gain.
pub fn perturbed_gain(
    kstar: &GainSchedule,
    seed: u64,
    scale: f64,
    feasible: impl Fn(&GainSchedule) -> bool,
) -> GainSchedule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbb67_ae85_84ca_a73b);
    let dir = GainSchedule::random_unit(Player::Controller, kstar.rows(), kstar.state_dim(), kstar.horizon(), &mut rng);
    let mut s = scale * kstar.norm().max(1.0);
    loop {
        let k = kstar.axpy(s, &dir);
        if feasible(&k) {
            return k;
        }
        s *= 0.5;
    }
}

/// Feasible controller gain for an LEQG problem near its saddle controller.
pub fn random_leqg_gain(sys: &LeqgSystem, seed: u64, scale: f64) -> GainSchedule {
    let kstar = grde(&sys.to_game()).expect("nonsingular").k_star;
    let inv_min = |x: &Mat| min_eig(&spd_inverse(x).expect("spd by construction"));
    let floor = 0.1 * inv_min(sys.w()).min(inv_min(sys.x0()));
    perturbed_gain(&kstar, seed, scale, |k| leqg_rde(sys, k).is_ok_and(|s| s.min_margin() > floor))
}

/// Feasible controller gain for an attenuation problem near its saddle controller.
pub fn random_da_gain(sys: &DaSystem, seed: u64, scale: f64) -> GainSchedule {
    let kstar = grde(&sys.to_game()).expect("nonsingular").k_star;
    let g2 = sys.gamma() * sys.gamma();
    perturbed_gain(&kstar, seed, scale, |k| da_rde(sys, k).is_ok_and(|s| s.min_margin() > 0.1 * g2))
}

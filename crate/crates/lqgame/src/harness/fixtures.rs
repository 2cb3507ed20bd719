//! Matrices and gains of the benchmark experiments, digit for digit.

use crate::linalg::{from_rows, Mat};
use crate::lq_core::{GainSchedule, NoiseModel, Player, TimeVaryingSystem};

pub const HORIZON: usize = 5;

pub fn a() -> Mat {
    from_rows(&[&[1.0, 0.0, -5.0], &[-1.0, 1.0, 0.0], &[0.0, 0.0, 1.0]])
}
pub fn b() -> Mat {
    from_rows(&[&[1.0, -10.0, 0.0], &[0.0, 3.0, 1.0], &[-1.0, 0.0, 2.0]])
}
pub fn d() -> Mat {
    from_rows(&[&[0.5, 0.0, 0.0], &[0.0, 0.2, 0.0], &[0.0, 0.0, 0.2]])
}
pub fn q() -> Mat {
    from_rows(&[&[2.0, -1.0, 0.0], &[-1.0, 2.0, -1.0], &[0.0, -1.0, 2.0]])
}
pub fn ru() -> Mat {
    from_rows(&[&[4.0, -1.0, 0.0], &[-1.0, 4.0, -2.0], &[0.0, -2.0, 3.0]])
}

fn eye(s: f64) -> Mat {
    Mat::identity(3, 3) * s
}

/// The benchmark game with `R^w = rw·I` and `Σ₀ = sigma0·I`.
pub fn base_game(rw: f64, sigma0: f64) -> TimeVaryingSystem {
    TimeVaryingSystem::time_invariant(
        HORIZON,
        a(),
        b(),
        d(),
        q(),
        ru(),
        eye(rw),
        NoiseModel::isotropic(3, sigma0).expect("positive covariance"),
    )
    .expect("benchmark system is valid")
}

/// Time-varying variant: `X_t = X + (−1)ᵗ t X / 10` for `X ∈ {A, B, D}`, `R^w = 10 I`.
pub fn time_varying_game() -> TimeVaryingSystem {
    let vary = |x: Mat| -> Vec<Mat> {
        (0..HORIZON)
            .map(|t| {
                let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
                &x + &x * (sign * t as f64 / 10.0)
            })
            .collect()
    };
    TimeVaryingSystem::new(
        vary(a()),
        vary(b()),
        vary(d()),
        vec![q(); HORIZON + 1],
        vec![ru(); HORIZON],
        vec![eye(10.0); HORIZON],
        NoiseModel::isotropic(3, 1.0).expect("positive covariance"),
    )
    .expect("benchmark system is valid")
}

/// System of the outer-loop landscape example.
pub fn outer_landscape_game() -> TimeVaryingSystem {
    let q2 = from_rows(&[&[3.0, -1.0, 0.0], &[-1.0, 2.0, -1.0], &[0.0, -1.0, 1.0]]);
    let ru2 = from_rows(&[&[2.0, 1.0, 1.0], &[1.0, 3.0, -1.0], &[1.0, -1.0, 3.0]]);
    TimeVaryingSystem::time_invariant(
        HORIZON,
        a(),
        b(),
        eye(0.5),
        q2,
        ru2,
        eye(OUTER_LANDSCAPE_RW),
        NoiseModel::isotropic(3, 1.0).expect("positive covariance"),
    )
    .expect("benchmark system is valid")
}

pub const OUTER_LANDSCAPE_RW: f64 = 7.22543;

/// Scalar two-step game whose outer objective stays bounded at the boundary of 𝒦.
pub fn scalar_noncoercive_game() -> TimeVaryingSystem {
    let s = |x: f64| Mat::from_element(1, 1, x);
    TimeVaryingSystem::time_invariant(2, s(2.0), s(1.0), s(1.0), s(1.0), s(1.0), s(5.0), NoiseModel::isotropic(1, 1.0).unwrap())
        .expect("benchmark system is valid")
}

/// `K^ε = 2 − ε` at both steps of the scalar game.
pub fn scalar_k_eps(eps: f64) -> GainSchedule {
    GainSchedule::constant(Player::Controller, Mat::from_element(1, 1, 2.0 - eps), 2).unwrap()
}

pub fn k_sched(block: Mat) -> GainSchedule {
    GainSchedule::constant(Player::Controller, block, HORIZON).unwrap()
}
pub fn l_sched(block: Mat) -> GainSchedule {
    GainSchedule::constant(Player::Disturbance, block, HORIZON).unwrap()
}

pub fn k0_case1() -> Mat {
    from_rows(&[&[-0.12, -0.01, 0.62], &[-0.21, 0.14, 0.15], &[-0.06, 0.05, 0.42]])
}
pub fn k0_case2() -> Mat {
    from_rows(&[&[-0.14, -0.04, 0.62], &[-0.21, 0.14, 0.15], &[-0.06, 0.05, 0.42]])
}
pub fn k0_zo_inner() -> Mat {
    from_rows(&[&[-0.04, -0.01, 0.61], &[-0.21, 0.15, 0.15], &[-0.06, 0.05, 0.42]])
}
pub fn k0_zo_outer() -> Mat {
    from_rows(&[&[-0.08, 0.35, 0.62], &[-0.21, 0.19, 0.32], &[-0.06, 0.10, 0.41]])
}
pub fn k0_divergence() -> Mat {
    from_rows(&[
        &[-0.1362, 0.0934, 0.6458],
        &[-0.2717, -0.1134, -0.4534],
        &[-0.6961, -0.9279, -0.6620],
    ])
}
pub fn l0_divergence() -> Mat {
    from_rows(&[
        &[0.2887, -0.2286, 0.4588],
        &[-0.7849, -0.1089, -0.3755],
        &[-0.2935, 0.9541, 0.7895],
    ])
}
pub fn k0_time_varying() -> Mat {
    from_rows(&[
        &[-0.0984, -0.7158, -0.1460],
        &[-0.1405, 0.0039, 0.4544],
        &[-0.1559, -0.7595, 0.7403],
    ])
}

/// Disturbance gains of the inner nonconcavity example (controller gain `k0_case1`).
pub fn nonconcave_l1() -> Mat {
    from_rows(&[&[-0.86, 0.97, 0.14], &[-0.82, 0.36, 0.51], &[0.98, 0.08, -0.20]])
}
pub fn nonconcave_l2() -> Mat {
    from_rows(&[&[-0.70, -0.37, 0.09], &[-0.54, -0.28, 0.23], &[0.74, 0.62, -0.51]])
}
/// Controller gains of the nonconvexity example at `L = 0`.
pub fn nonconvex_k1() -> Mat {
    from_rows(&[&[1.44, 0.31, -1.18], &[0.03, -0.13, -0.39], &[0.36, -1.71, 0.24]])
}
pub fn nonconvex_k2() -> Mat {
    from_rows(&[&[-0.08, -0.16, -1.96], &[-0.13, -1.12, 1.28], &[1.67, -0.91, 1.71]])
}
/// Controller gains of the outer landscape example.
pub fn outer_k1() -> Mat {
    from_rows(&[
        &[-0.8750, 1.2500, -2.5000],
        &[-0.1875, 0.1250, 0.2500],
        &[-0.4375, 0.6250, -0.7500],
    ])
}
pub fn outer_k2() -> Mat {
    from_rows(&[
        &[-0.8786, 1.2407, -2.4715],
        &[-0.1878, 0.1237, 0.2548],
        &[-0.4439, 0.5820, -0.7212],
    ])
}

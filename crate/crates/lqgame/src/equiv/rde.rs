//! Riccati difference equations of the two formulations, their closed-form
//! objectives and policy gradients.

use crate::error::{LqError, Result};
use crate::linalg::{lu_solve, min_eig, spd_solve, sym_eigenvalues, sym_sqrt, symmetrize, Mat, TOL_FEAS};
use crate::lq_core::{GainSchedule, Player};

use super::systems::{DaSystem, LeqgSystem};

/// Solution of a formulation's Riccati difference equation at fixed gains.
#[derive(Debug, Clone)]
pub struct RdeSolution {
    /// `P_0, …, P_N`. Entries before a violated step condition are NaN.
    pub p: Vec<Mat>,
    /// `P̃_t` for `t ≥ 1` (index 0 repeats `P_0`).
    pub p_tilde: Vec<Mat>,
    /// `margins[0]` is `λ_min` of the initial-state condition, `margins[t]`
    /// of the condition on `P_t`; NaN where never evaluated.
    pub margins: Vec<f64>,
    /// All margins exceed the feasibility tolerance.
    pub feasible: bool,
    /// Index into `margins` of the first violation found.
    pub violation: Option<usize>,
}

impl RdeSolution {
    pub fn min_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn check_gains(k: &GainSchedule, n: usize, d: usize, m: usize) -> Result<()> {
    if k.player() != Player::Controller || k.horizon() != n || k.rows() != d || k.state_dim() != m {
        return Err(LqError::Dimension(format!(
            "controller gains must be {n} blocks of {d}x{m}, got {} of {}x{}",
            k.horizon(),
            k.rows(),
            k.state_dim()
        )));
    }
    Ok(())
}

/// `P ↦ (margin, P̃)` for the condition attached to `P_{t+1}`.
type Inflate<'a> = dyn Fn(usize, &Mat) -> (f64, Option<Mat>) + 'a;

/// Shared backward pass `P_t = Q_t + K_tᵀR_tK_t + (A_t − B_tK_t)ᵀ P̃_{t+1} (A_t − B_tK_t)`.
fn backward(
    a: &[Mat],
    b: &[Mat],
    q: &[Mat],
    r: &[Mat],
    k: &GainSchedule,
    inflate: &Inflate<'_>,
    initial: impl Fn(&Mat) -> f64,
) -> RdeSolution {
    let n = a.len();
    let m = a[0].nrows();
    let nan = Mat::from_element(m, m, f64::NAN);
    let mut p = vec![nan.clone(); n + 1];
    let mut pt = vec![nan; n + 1];
    let mut margins = vec![f64::NAN; n + 1];
    p[n] = q[n].clone();
    for t in (0..n).rev() {
        let (margin, tilde) = inflate(t, &p[t + 1]);
        margins[t + 1] = margin;
        let tilde = match tilde {
            Some(x) if margin > TOL_FEAS => x,
            _ => return RdeSolution { p, p_tilde: pt, margins, feasible: false, violation: Some(t + 1) },
        };
        let kt = k.block(t);
        let acl = &a[t] - &b[t] * kt;
        p[t] = symmetrize(&(&q[t] + kt.transpose() * &r[t] * kt + acl.transpose() * &tilde * &acl));
        pt[t + 1] = tilde;
    }
    pt[0] = p[0].clone();
    margins[0] = initial(&p[0]);
    let violation = margins.iter().position(|&x| !(x > TOL_FEAS));
    RdeSolution { p, p_tilde: pt, margins, feasible: violation.is_none(), violation }
}

/// `Σᵢ ln(1 − s·λᵢ(X))` for symmetric `X`, accurate for tiny `s`.
fn log_det_one_minus(s: f64, x: &Mat) -> f64 {
    sym_eigenvalues(x).iter().map(|l| (-s * l).ln_1p()).sum()
}

/// `Λ_0 = M_0`, `Λ_t = M_t + S_t Λ_{t−1} S_tᵀ`; this is the product-and-sum
/// expression for `Σ_{K_t}` with empty products read as the identity.
fn sigma_recursion(m0: Mat, mut step: impl FnMut(usize) -> (Mat, Mat), n: usize) -> Vec<Mat> {
    let mut out = Vec::with_capacity(n);
    let mut lam = m0;
    for t in 0..n {
        if t > 0 {
            let (mt, st) = step(t);
            lam = symmetrize(&(mt + &st * &lam * st.transpose()));
        }
        out.push(lam.clone());
    }
    out
}

/// `2[(R_t + B_tᵀP̃_{t+1}B_t)K_t − B_tᵀP̃_{t+1}A_t] Σ_{K_t}`.
fn assemble(a: &[Mat], b: &[Mat], r: &[Mat], k: &GainSchedule, sol: &RdeSolution, sigma: &[Mat]) -> GainSchedule {
    let blocks = (0..a.len())
        .map(|t| {
            let pt = &sol.p_tilde[t + 1];
            let btp = b[t].transpose() * pt;
            let f = (&r[t] + &btp * &b[t]) * k.block(t) - &btp * &a[t];
            f * &sigma[t] * 2.0
        })
        .collect();
    GainSchedule::new(Player::Controller, blocks).expect("shapes follow the gains")
}

/// Gains `(R_t + B_tᵀP̃_{t+1}B_t)⁻¹B_tᵀP̃_{t+1}A_t` that the RDE at `K` prescribes.
pub(crate) fn rde_gains(a: &[Mat], b: &[Mat], r: &[Mat], sol: &RdeSolution) -> Vec<Mat> {
    (0..a.len())
        .map(|t| {
            let pt = &sol.p_tilde[t + 1];
            let btp = b[t].transpose() * pt;
            spd_solve(&(&r[t] + &btp * &b[t]), &(&btp * &a[t]))
                .unwrap_or_else(|| Mat::from_element(b[t].ncols(), a[t].ncols(), f64::NAN))
        })
        .collect()
}

fn risk_error(sol: &RdeSolution) -> LqError {
    let step = sol.violation.unwrap_or(0);
    LqError::RiskFeasibility { step, margin: sol.margins[step] }
}

fn attenuation_error(sol: &RdeSolution) -> LqError {
    let step = sol.violation.unwrap_or(0);
    LqError::AttenuationFeasibility { step, margin: sol.margins[step] }
}

/// LEQG recursion with `P̃ = P + βP(W⁻¹ − βP)⁻¹P`; margins are
/// `λ_min(W⁻¹ − βP_t)` and `λ_min(X₀⁻¹ − βP₀)`.
pub fn leqg_rde(sys: &LeqgSystem, k: &GainSchedule) -> Result<RdeSolution> {
    check_gains(k, sys.horizon(), sys.control_dim(), sys.state_dim())?;
    let beta = sys.beta();
    let w_inv = spd_solve(sys.w(), &Mat::identity(sys.state_dim(), sys.state_dim())).expect("W is positive definite");
    let x0_inv = spd_solve(sys.x0(), &Mat::identity(sys.state_dim(), sys.state_dim())).expect("X0 is positive definite");
    let inflate = |_: usize, p: &Mat| {
        let gap = symmetrize(&(&w_inv - p * beta));
        let margin = min_eig(&gap);
        let tilde = spd_solve(&gap, p).map(|x| symmetrize(&(p + p * x * beta)));
        (margin, tilde)
    };
    Ok(backward(sys.a(), sys.b(), sys.q(), sys.r(), k, &inflate, |p0| min_eig(&(&x0_inv - p0 * beta))))
}

/// `−β⁻¹[log det(I − βP₀X₀) + Σ_{t≥1} log det(I − βP_tW)]`.
pub fn leqg_value(sys: &LeqgSystem, k: &GainSchedule) -> Result<f64> {
    let sol = leqg_rde(sys, k)?;
    if !sol.feasible {
        return Err(risk_error(&sol));
    }
    let beta = sys.beta();
    let (xs, ws) = (sym_sqrt(sys.x0()), sym_sqrt(sys.w()));
    let mut total = log_det_one_minus(beta, &(&xs * &sol.p[0] * &xs));
    for p in &sol.p[1..] {
        total += log_det_one_minus(beta, &(&ws * p * &ws));
    }
    Ok(-total / beta)
}

pub fn leqg_gradient(sys: &LeqgSystem, k: &GainSchedule) -> Result<GainSchedule> {
    let sol = leqg_rde(sys, k)?;
    if !sol.feasible {
        return Err(risk_error(&sol));
    }
    let beta = sys.beta();
    let m = sys.state_dim();
    let eye = Mat::identity(m, m);
    // X^{1/2}(I − βX^{1/2}PX^{1/2})⁻¹X^{1/2}
    let weight = |x: &Mat, p: &Mat| {
        let s = sym_sqrt(x);
        let inner = symmetrize(&(&eye - &s * p * &s * beta));
        &s * spd_solve(&inner, &s).expect("feasible")
    };
    let m0 = weight(sys.x0(), &sol.p[0]);
    let sigma = sigma_recursion(
        m0,
        |t| {
            let p = &sol.p[t];
            let acl = &sys.a()[t - 1] - &sys.b()[t - 1] * k.block(t - 1);
            let st = lu_solve(&(&eye - sys.w() * p * beta), &acl).expect("feasible");
            (weight(sys.w(), p), st)
        },
        sys.horizon(),
    );
    Ok(assemble(sys.a(), sys.b(), sys.r(), k, &sol, &sigma))
}

/// Attenuation recursion with `P̃ = P + PD(γ²I − DᵀPD)⁻¹DᵀP`; margins are
/// `λ_min(γ²I − D_{t−1}ᵀP_tD_{t−1})` and `λ_min(γ²I − P₀)`.
pub fn da_rde(sys: &DaSystem, k: &GainSchedule) -> Result<RdeSolution> {
    check_gains(k, sys.horizon(), sys.control_dim(), sys.state_dim())?;
    let g2 = sys.gamma() * sys.gamma();
    let inflate = |t: usize, p: &Mat| {
        let d = &sys.d()[t];
        let h = symmetrize(&(Mat::identity(d.ncols(), d.ncols()) * g2 - d.transpose() * p * d));
        let margin = min_eig(&h);
        let dtp = d.transpose() * p;
        let tilde = spd_solve(&h, &dtp).map(|x| symmetrize(&(p + dtp.transpose() * x)));
        (margin, tilde)
    };
    let m = sys.state_dim();
    Ok(backward(sys.a(), sys.b(), &sys.q(), &sys.r(), k, &inflate, |p0| {
        min_eig(&(Mat::identity(m, m) * g2 - p0))
    }))
}

/// The log-det bound and the trace bound
/// `Tr(P₀) + Σ_{t≥1} Tr(P_t D_{t−1}D_{t−1}ᵀ)`.
pub fn da_values(sys: &DaSystem, k: &GainSchedule) -> Result<(f64, f64)> {
    let sol = da_rde(sys, k)?;
    if !sol.feasible {
        return Err(attenuation_error(&sol));
    }
    let g2 = sys.gamma() * sys.gamma();
    let mut log_det = log_det_one_minus(1.0 / g2, &sol.p[0]);
    let mut trace = sol.p[0].trace();
    for (t, p) in sol.p.iter().enumerate().skip(1) {
        let d = &sys.d()[t - 1];
        let dpd = d.transpose() * p * d;
        log_det += log_det_one_minus(1.0 / g2, &dpd);
        trace += dpd.trace();
    }
    Ok((-g2 * log_det, trace))
}

/// Step conditions `t ≥ 1` hold; the initial-state condition may not.
pub(crate) fn steps_feasible(sol: &RdeSolution) -> bool {
    sol.margins[1..].iter().all(|&x| x > TOL_FEAS)
}

fn da_factor(sys: &DaSystem, k: &GainSchedule, sol: &RdeSolution, t: usize) -> Mat {
    let g2 = sys.gamma() * sys.gamma();
    let m = sys.state_dim();
    let d = &sys.d()[t - 1];
    let acl = &sys.a()[t - 1] - &sys.b()[t - 1] * k.block(t - 1);
    lu_solve(&(Mat::identity(m, m) - d * d.transpose() * &sol.p[t] / g2), &acl).expect("step condition holds")
}

/// Trace-bound gradient; only the step conditions are needed.
pub(crate) fn da_trace_gradient_from(sys: &DaSystem, k: &GainSchedule, sol: &RdeSolution) -> GainSchedule {
    let m = sys.state_dim();
    let sigma = sigma_recursion(
        Mat::identity(m, m),
        |t| {
            let d = &sys.d()[t - 1];
            (d * d.transpose(), da_factor(sys, k, sol, t))
        },
        sys.horizon(),
    );
    assemble(sys.a(), sys.b(), &sys.r(), k, sol, &sigma)
}

/// Gradients of the log-det bound and of the trace bound.
pub fn da_gradients(sys: &DaSystem, k: &GainSchedule) -> Result<(GainSchedule, GainSchedule)> {
    let sol = da_rde(sys, k)?;
    if !sol.feasible {
        return Err(attenuation_error(&sol));
    }
    let g2 = sys.gamma() * sys.gamma();
    let m = sys.state_dim();
    let eye = Mat::identity(m, m);
    let m0 = spd_solve(&symmetrize(&(&eye - &sol.p[0] / g2)), &eye).expect("feasible");
    let sigma = sigma_recursion(
        m0,
        |t| {
            let d = &sys.d()[t - 1];
            let n = d.ncols();
            let h = symmetrize(&(Mat::identity(n, n) - d.transpose() * &sol.p[t] * d / g2));
            (d * spd_solve(&h, &d.transpose()).expect("feasible"), da_factor(sys, k, &sol, t))
        },
        sys.horizon(),
    );
    Ok((assemble(sys.a(), sys.b(), &sys.r(), k, &sol, &sigma), da_trace_gradient_from(sys, k, &sol)))
}

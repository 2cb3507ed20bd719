//! The risk-sensitive and disturbance-attenuation problem data.

use crate::error::{LqError, Result};
use crate::linalg::{min_eig, sym_sqrt, Mat, TOL_FEAS, TOL_PSD};
use crate::lq_core::{check_shape, check_symmetric, NoiseModel, TimeVaryingSystem};

fn check_pd(m: &Mat, name: &str) -> Result<()> {
    check_symmetric(m, name)?;
    let l = min_eig(m);
    if l <= TOL_FEAS {
        return Err(LqError::InvalidSystem(format!("{name} must be positive definite (min eigenvalue {l:.3e})")));
    }
    Ok(())
}

fn check_psd(m: &Mat, name: &str) -> Result<()> {
    check_symmetric(m, name)?;
    let l = min_eig(m);
    if l < -TOL_PSD {
        return Err(LqError::InvalidSystem(format!("{name} must be positive semidefinite (min eigenvalue {l:.3e})")));
    }
    Ok(())
}

fn check_steps(a: &[Mat], b: &[Mat]) -> Result<(usize, usize, usize)> {
    let n = a.len();
    if n == 0 {
        return Err(LqError::Dimension("horizon must be positive".into()));
    }
    if b.len() != n {
        return Err(LqError::Dimension(format!("B has {} steps, expected {n}", b.len())));
    }
    let (m, d) = (a[0].nrows(), b[0].ncols());
    if m == 0 || d == 0 {
        return Err(LqError::Dimension("state and control dimensions must be positive".into()));
    }
    for t in 0..n {
        check_shape(&a[t], m, m, &format!("A_{t}"))?;
        check_shape(&b[t], m, d, &format!("B_{t}"))?;
    }
    Ok((n, m, d))
}

/// Linear exponential-quadratic Gaussian control problem.
///
/// `x_{t+1} = A_t x_t + B_t u_t + w_t` with `w_t ~ N(0, W)`, `x_0 ~ N(0, X_0)`,
/// risk parameter `β`. `q` holds `Q_0, …, Q_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeqgSystem {
    a: Vec<Mat>,
    b: Vec<Mat>,
    q: Vec<Mat>,
    r: Vec<Mat>,
    w: Mat,
    x0: Mat,
    beta: f64,
}

impl LeqgSystem {
    pub fn new(a: Vec<Mat>, b: Vec<Mat>, q: Vec<Mat>, r: Vec<Mat>, w: Mat, x0: Mat, beta: f64) -> Result<Self> {
        let (n, m, d) = check_steps(&a, &b)?;
        if q.len() != n + 1 || r.len() != n {
            return Err(LqError::Dimension(format!("expected {} Q and {n} R matrices", n + 1)));
        }
        for (t, qt) in q.iter().enumerate() {
            check_shape(qt, m, m, &format!("Q_{t}"))?;
            check_psd(qt, &format!("Q_{t}"))?;
        }
        for (t, rt) in r.iter().enumerate() {
            check_shape(rt, d, d, &format!("R_{t}"))?;
            check_pd(rt, &format!("R_{t}"))?;
        }
        check_shape(&w, m, m, "W")?;
        check_pd(&w, "W")?;
        check_shape(&x0, m, m, "X0")?;
        check_pd(&x0, "X0")?;
        if !(beta.is_finite() && beta > 0.0) {
            return Err(LqError::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { a, b, q, r, w, x0, beta })
    }

    pub fn horizon(&self) -> usize {
        self.a.len()
    }
    pub fn state_dim(&self) -> usize {
        self.a[0].nrows()
    }
    pub fn control_dim(&self) -> usize {
        self.b[0].ncols()
    }
    pub fn a(&self) -> &[Mat] {
        &self.a
    }
    pub fn b(&self) -> &[Mat] {
        &self.b
    }
    pub fn q(&self) -> &[Mat] {
        &self.q
    }
    pub fn r(&self) -> &[Mat] {
        &self.r
    }
    pub fn w(&self) -> &Mat {
        &self.w
    }
    pub fn x0(&self) -> &Mat {
        &self.x0
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), self.q.clone(), self.r.clone(), self.w.clone(), self.x0.clone(), beta)
    }

    /// Equivalent game: `D_t = W^{1/2}`, `R^w_t = β⁻¹I`, `R^u_t = R_t`, same `Q`.
    /// The game's noise covariance is `W` (it does not affect the saddle gains).
    pub fn to_game(&self) -> TimeVaryingSystem {
        let n = self.horizon();
        let m = self.state_dim();
        let d = sym_sqrt(&self.w);
        TimeVaryingSystem::new(
            self.a.clone(),
            self.b.clone(),
            vec![d; n],
            self.q.clone(),
            self.r.clone(),
            vec![Mat::identity(m, m) / self.beta; n],
            NoiseModel::sphere(self.w.clone()).expect("W is positive definite"),
        )
        .expect("validated on construction")
    }
}

/// Finite-horizon LQ disturbance-attenuation problem.
///
/// `x_{t+1} = A_t x_t + B_t u_t + D_t w_t`, `z_t = C_t x_t + E_t u_t`, with
/// the normalisation `E_tᵀ[C_t E_t] = [0 R_t]`, terminal weight `Q_N` and
/// attenuation level `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DaSystem {
    a: Vec<Mat>,
    b: Vec<Mat>,
    d: Vec<Mat>,
    c: Vec<Mat>,
    e: Vec<Mat>,
    q_n: Mat,
    gamma: f64,
}

/// Tolerance of the `E_tᵀ[C_t E_t] = [0 R_t]` normalisation.
pub const NORMALISATION_TOL: f64 = 1e-10;

impl DaSystem {
    pub fn new(a: Vec<Mat>, b: Vec<Mat>, d: Vec<Mat>, c: Vec<Mat>, e: Vec<Mat>, q_n: Mat, gamma: f64) -> Result<Self> {
        let (n, m, du) = check_steps(&a, &b)?;
        if d.len() != n || c.len() != n || e.len() != n {
            return Err(LqError::Dimension(format!("D, C and E need {n} steps")));
        }
        let dw = d[0].ncols();
        let out = c[0].nrows();
        if dw == 0 || out == 0 {
            return Err(LqError::Dimension("disturbance and output dimensions must be positive".into()));
        }
        for t in 0..n {
            check_shape(&d[t], m, dw, &format!("D_{t}"))?;
            check_shape(&c[t], out, m, &format!("C_{t}"))?;
            check_shape(&e[t], out, du, &format!("E_{t}"))?;
            let cross = e[t].transpose() * &c[t];
            if cross.amax() > NORMALISATION_TOL * c[t].amax().max(e[t].amax()).max(1.0) {
                return Err(LqError::InvalidSystem(format!("E_{t}ᵀC_{t} must vanish")));
            }
            check_pd(&(e[t].transpose() * &e[t]), &format!("E_{t}ᵀE_{t}"))?;
        }
        check_shape(&q_n, m, m, "Q_N")?;
        check_psd(&q_n, "Q_N")?;
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(LqError::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self { a, b, d, c, e, q_n, gamma })
    }

    /// Reads a game with `R^w_t = γ²I` back as an attenuation problem, using
    /// `C_t = [Q_t^{1/2}; 0]` and `E_t = [0; (R^u_t)^{1/2}]`.
    pub fn from_game(sys: &TimeVaryingSystem) -> Result<Self> {
        let rw0 = &sys.rw()[0];
        let g2 = rw0[(0, 0)];
        let n = sys.disturbance_dim();
        for (t, rw) in sys.rw().iter().enumerate() {
            if (rw - Mat::identity(n, n) * g2).amax() > 1e-12 * g2 {
                return Err(LqError::InvalidSystem(format!("R^w_{t} is not a common multiple of the identity")));
            }
        }
        let (m, du) = (sys.state_dim(), sys.control_dim());
        let mut c = Vec::with_capacity(sys.horizon());
        let mut e = Vec::with_capacity(sys.horizon());
        for t in 0..sys.horizon() {
            let mut ct = Mat::zeros(m + du, m);
            ct.view_mut((0, 0), (m, m)).copy_from(&sym_sqrt(&sys.q()[t]));
            let mut et = Mat::zeros(m + du, du);
            et.view_mut((m, 0), (du, du)).copy_from(&sym_sqrt(&sys.ru()[t]));
            c.push(ct);
            e.push(et);
        }
        Self::new(
            sys.a().to_vec(),
            sys.b().to_vec(),
            sys.d().to_vec(),
            c,
            e,
            sys.q()[sys.horizon()].clone(),
            g2.sqrt(),
        )
    }

    pub fn horizon(&self) -> usize {
        self.a.len()
    }
    pub fn state_dim(&self) -> usize {
        self.a[0].nrows()
    }
    pub fn control_dim(&self) -> usize {
        self.b[0].ncols()
    }
    pub fn a(&self) -> &[Mat] {
        &self.a
    }
    pub fn b(&self) -> &[Mat] {
        &self.b
    }
    pub fn d(&self) -> &[Mat] {
        &self.d
    }
    pub fn c(&self) -> &[Mat] {
        &self.c
    }
    pub fn e(&self) -> &[Mat] {
        &self.e
    }
    pub fn q_n(&self) -> &Mat {
        &self.q_n
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `Q_t = C_tᵀC_t` for `t < N`, then `Q_N`.
    pub fn q(&self) -> Vec<Mat> {
        self.c.iter().map(|c| c.transpose() * c).chain(std::iter::once(self.q_n.clone())).collect()
    }

    /// `R_t = E_tᵀE_t`.
    pub fn r(&self) -> Vec<Mat> {
        self.e.iter().map(|e| e.transpose() * e).collect()
    }

    /// Equivalent game: `R^w_t = γ²I`, `R^u_t = R_t`, `Q_t = C_tᵀC_t`, same `D_t`,
    /// unit-intensity noise.
    pub fn to_game(&self) -> TimeVaryingSystem {
        let n = self.d[0].ncols();
        let g2 = self.gamma * self.gamma;
        TimeVaryingSystem::new(
            self.a.clone(),
            self.b.clone(),
            self.d.clone(),
            self.q().into_iter().map(|q| crate::linalg::symmetrize(&q)).collect(),
            self.r().into_iter().map(|r| crate::linalg::symmetrize(&r)).collect(),
            vec![Mat::identity(n, n) * g2; self.horizon()],
            NoiseModel::isotropic(self.state_dim(), 1.0).expect("identity covariance"),
        )
        .expect("validated on construction")
    }
}

/// Either formulation, as loaded from a config.
#[derive(Debug, Clone, PartialEq)]
pub enum Formulation {
    Leqg(LeqgSystem),
    Da(DaSystem),
}

impl Formulation {
    pub fn to_game(&self) -> TimeVaryingSystem {
        match self {
            Formulation::Leqg(s) => s.to_game(),
            Formulation::Da(s) => s.to_game(),
        }
    }
}

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{LqError, Result};
use crate::linalg::{max_eig, min_eig, sym_sqrt, Mat, TOL_FEAS, TOL_PSD};

/// Distribution of the initial state and the additive process noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    /// `ξ = √m Σ^{1/2} u`, `u` uniform on the unit sphere.
    Sphere,
    /// Standard normal rejected outside radius `clip`, rescaled so the
    /// covariance is still exactly `Σ`.
    TruncatedGaussian { clip: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    sigma0_step: Mat,
    sqrt: Mat,
    kind: NoiseKind,
    phi: f64,
    vartheta: f64,
    /// Per-coordinate variance of the truncated normal (1 for the sphere).
    trunc_var: f64,
}

impl NoiseModel {
    pub fn new(sigma0_step: Mat, kind: NoiseKind) -> Result<Self> {
        let m = sigma0_step.nrows();
        if m == 0 || sigma0_step.ncols() != m {
            return Err(LqError::Dimension("noise covariance must be square and non-empty".into()));
        }
        if !sigma0_step.iter().all(|x| x.is_finite()) {
            return Err(LqError::InvalidSystem("noise covariance has non-finite entries".into()));
        }
        check_symmetric(&sigma0_step, "Sigma0")?;
        let phi = min_eig(&sigma0_step);
        if phi <= TOL_FEAS {
            return Err(LqError::InvalidSystem(format!(
                "noise covariance must be positive definite (min eigenvalue {phi:.3e})"
            )));
        }
        let lmax = max_eig(&sigma0_step);
        let (vartheta, trunc_var) = match kind {
            NoiseKind::Sphere => (((m as f64) * lmax).sqrt(), 1.0),
            NoiseKind::TruncatedGaussian { clip } => {
                if !(clip.is_finite() && clip > 0.0) {
                    return Err(LqError::InvalidParameter(format!("truncation radius {clip}")));
                }
                let var = truncated_normal_variance(m, clip);
                (clip * (lmax / var).sqrt(), var)
            }
        };
        let sqrt = sym_sqrt(&sigma0_step);
        Ok(Self { sigma0_step, sqrt, kind, phi, vartheta, trunc_var })
    }

    pub fn sphere(sigma0_step: Mat) -> Result<Self> {
        Self::new(sigma0_step, NoiseKind::Sphere)
    }

    /// `scale · I_m` with the sphere distribution.
    pub fn isotropic(m: usize, scale: f64) -> Result<Self> {
        Self::sphere(Mat::identity(m, m) * scale)
    }

    pub fn sigma0_step(&self) -> &Mat {
        &self.sigma0_step
    }
    pub fn sqrt_sigma(&self) -> &Mat {
        &self.sqrt
    }
    pub fn kind(&self) -> NoiseKind {
        self.kind
    }
    /// `λ_min` of the block covariance.
    pub fn phi(&self) -> f64 {
        self.phi
    }
    /// Almost-sure bound on `‖x₀‖` and `‖ξ_t‖`.
    pub fn vartheta(&self) -> f64 {
        self.vartheta
    }
    pub fn dim(&self) -> usize {
        self.sigma0_step.nrows()
    }
    pub(crate) fn trunc_var(&self) -> f64 {
        self.trunc_var
    }
}

/// `E[z_i² | ‖z‖ ≤ c]` for `z ~ N(0, I_m)`, via `E[χ²_m 1{χ²_m ≤ a}] = m P(χ²_{m+2} ≤ a)`.
fn truncated_normal_variance(m: usize, clip: f64) -> f64 {
    let a = clip * clip;
    let lo = ChiSquared::new(m as f64).expect("positive dof").cdf(a);
    let hi = ChiSquared::new(m as f64 + 2.0).expect("positive dof").cdf(a);
    if lo <= 0.0 {
        // Deep truncation: the conditional law concentrates near the origin.
        a / (m as f64 + 2.0)
    } else {
        hi / lo
    }
}

pub(crate) fn check_symmetric(m: &Mat, name: &str) -> Result<()> {
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-10 * scale {
        return Err(LqError::InvalidSystem(format!("{name} is not symmetric")));
    }
    Ok(())
}

pub(crate) fn check_shape(m: &Mat, rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(LqError::Dimension(format!(
            "{what} is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !m.iter().all(|x| x.is_finite()) {
        return Err(LqError::InvalidSystem(format!("{what} has non-finite entries")));
    }
    Ok(())
}

/// Finite-horizon time-varying zero-sum LQ game. `q` has `N+1` entries, the
/// last one being the terminal weight.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeVaryingSystem {
    a: Vec<Mat>,
    b: Vec<Mat>,
    d: Vec<Mat>,
    q: Vec<Mat>,
    ru: Vec<Mat>,
    rw: Vec<Mat>,
    noise: NoiseModel,
}

impl TimeVaryingSystem {
    pub fn new(
        a: Vec<Mat>,
        b: Vec<Mat>,
        d: Vec<Mat>,
        q: Vec<Mat>,
        ru: Vec<Mat>,
        rw: Vec<Mat>,
        noise: NoiseModel,
    ) -> Result<Self> {
        let n_steps = a.len();
        if n_steps == 0 {
            return Err(LqError::Dimension("horizon must be positive".into()));
        }
        for (name, len) in [("B", b.len()), ("D", d.len()), ("Ru", ru.len()), ("Rw", rw.len())] {
            if len != n_steps {
                return Err(LqError::Dimension(format!("{name} has {len} steps, expected {n_steps}")));
            }
        }
        if q.len() != n_steps + 1 {
            return Err(LqError::Dimension(format!(
                "Q has {} entries, expected N+1 = {}",
                q.len(),
                n_steps + 1
            )));
        }
        let m = a[0].nrows();
        let du = b[0].ncols();
        let dw = d[0].ncols();
        if m == 0 || du == 0 || dw == 0 {
            return Err(LqError::Dimension("state, control and disturbance dimensions must be positive".into()));
        }
        if noise.dim() != m {
            return Err(LqError::Dimension(format!("noise is {}-dimensional, state is {m}", noise.dim())));
        }
        for t in 0..n_steps {
            check_shape(&a[t], m, m, &format!("A_{t}"))?;
            check_shape(&b[t], m, du, &format!("B_{t}"))?;
            check_shape(&d[t], m, dw, &format!("D_{t}"))?;
            check_shape(&ru[t], du, du, &format!("Ru_{t}"))?;
            check_shape(&rw[t], dw, dw, &format!("Rw_{t}"))?;
            check_symmetric(&ru[t], &format!("Ru_{t}"))?;
            check_symmetric(&rw[t], &format!("Rw_{t}"))?;
            for (name, r) in [("Ru", &ru[t]), ("Rw", &rw[t])] {
                let l = min_eig(r);
                if l <= TOL_FEAS {
                    return Err(LqError::InvalidSystem(format!(
                        "{name}_{t} must be positive definite (min eigenvalue {l:.3e})"
                    )));
                }
            }
        }
        for (t, qt) in q.iter().enumerate() {
            check_shape(qt, m, m, &format!("Q_{t}"))?;
            check_symmetric(qt, &format!("Q_{t}"))?;
            let l = min_eig(qt);
            if l < -TOL_PSD {
                return Err(LqError::InvalidSystem(format!(
                    "Q_{t} must be positive semidefinite (min eigenvalue {l:.3e})"
                )));
            }
        }
        Ok(Self { a, b, d, q, ru, rw, noise })
    }

    /// Replicates one set of matrices over the horizon; `Q_N = q`.
    #[allow(clippy::too_many_arguments)]
    pub fn time_invariant(
        horizon: usize,
        a: Mat,
        b: Mat,
        d: Mat,
        q: Mat,
        ru: Mat,
        rw: Mat,
        noise: NoiseModel,
    ) -> Result<Self> {
        Self::new(
            vec![a; horizon],
            vec![b; horizon],
            vec![d; horizon],
            vec![q; horizon + 1],
            vec![ru; horizon],
            vec![rw; horizon],
            noise,
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
    pub fn disturbance_dim(&self) -> usize {
        self.d[0].ncols()
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
    pub fn q(&self) -> &[Mat] {
        &self.q
    }
    pub fn ru(&self) -> &[Mat] {
        &self.ru
    }
    pub fn rw(&self) -> &[Mat] {
        &self.rw
    }
    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    /// Same dynamics and weights with a different disturbance weight.
    pub fn with_rw(&self, rw: Vec<Mat>) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), self.d.clone(), self.q.clone(), self.ru.clone(), rw, self.noise.clone())
    }

    pub fn with_noise(&self, noise: NoiseModel) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), self.d.clone(), self.q.clone(), self.ru.clone(), self.rw.clone(), noise)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> Mat {
        Mat::from_element(1, 1, x)
    }

    #[test]
    fn sphere_bound_is_sqrt_m_lambda_max() {
        let n = NoiseModel::sphere(Mat::from_diagonal(&crate::linalg::Vector::from_vec(vec![1.0, 4.0]))).unwrap();
        assert!((n.vartheta() - (2.0f64 * 4.0).sqrt()).abs() < 1e-12);
        assert!((n.phi() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncated_variance_tends_to_one() {
        assert!((truncated_normal_variance(3, 50.0) - 1.0).abs() < 1e-12);
        let v = truncated_normal_variance(1, 1.0);
        // Var of N(0,1) truncated to [-1,1].
        assert!((v - 0.291_125_5).abs() < 1e-6, "{v}");
    }

    #[test]
    fn rejects_indefinite_weights() {
        let noise = NoiseModel::isotropic(1, 1.0).unwrap();
        let err = TimeVaryingSystem::time_invariant(
            2, scalar(1.0), scalar(1.0), scalar(1.0), scalar(1.0), scalar(1.0), scalar(0.0), noise.clone(),
        );
        assert!(matches!(err, Err(LqError::InvalidSystem(_))));
        let err = TimeVaryingSystem::time_invariant(
            2, scalar(1.0), scalar(1.0), scalar(1.0), scalar(-1.0), scalar(1.0), scalar(1.0), noise,
        );
        assert!(matches!(err, Err(LqError::InvalidSystem(_))));
    }

    #[test]
    fn rejects_ragged_lists() {
        let noise = NoiseModel::isotropic(1, 1.0).unwrap();
        let err = TimeVaryingSystem::new(
            vec![scalar(1.0); 2],
            vec![scalar(1.0); 2],
            vec![scalar(1.0); 2],
            vec![scalar(1.0); 2],
            vec![scalar(1.0); 2],
            vec![scalar(1.0); 2],
            noise,
        );
        assert!(matches!(err, Err(LqError::Dimension(_))));
    }
}

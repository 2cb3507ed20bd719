//! Allocation-free rollout kernel used inside the Monte Carlo batches.
//!
//! Matrices are stored flat and row-major; gains use the per-block row-major
//! layout of [`GainSchedule::to_flat`](crate::lq_core::GainSchedule::to_flat).

use rand::Rng;
use rand_distr::StandardNormal;

use crate::lq_core::{NoiseKind, NoiseModel, TimeVaryingSystem};

fn flat(m: &crate::linalg::Mat) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Flattened copy of a system's matrices.
#[derive(Debug, Clone)]
pub(crate) struct FlatSystem {
    pub horizon: usize,
    pub m: usize,
    pub d: usize,
    pub n: usize,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    dd: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    ru: Vec<Vec<f64>>,
    rw: Vec<Vec<f64>>,
}

impl FlatSystem {
    pub fn new(sys: &TimeVaryingSystem) -> Self {
        let f = |v: &[crate::linalg::Mat]| v.iter().map(flat).collect();
        Self {
            horizon: sys.horizon(),
            m: sys.state_dim(),
            d: sys.control_dim(),
            n: sys.disturbance_dim(),
            a: f(sys.a()),
            b: f(sys.b()),
            dd: f(sys.d()),
            q: f(sys.q()),
            ru: f(sys.ru()),
            rw: f(sys.rw()),
        }
    }

    pub fn k_len(&self) -> usize {
        self.horizon * self.d * self.m
    }

    pub fn l_len(&self) -> usize {
        self.horizon * self.n * self.m
    }
}

/// `out += sign · Xᵀ R X` for `X` (r×m) and symmetric `R` (r×r).
fn add_gram(out: &mut [f64], x: &[f64], r: &[f64], rows: usize, m: usize, sign: f64, tmp: &mut [f64]) {
    // tmp = R X  (rows×m)
    for i in 0..rows {
        for j in 0..m {
            let mut s = 0.0;
            for k in 0..rows {
                s += r[i * rows + k] * x[k * m + j];
            }
            tmp[i * m + j] = s;
        }
    }
    for i in 0..m {
        for j in 0..m {
            let mut s = 0.0;
            for k in 0..rows {
                s += x[k * m + i] * tmp[k * m + j];
            }
            out[i * m + j] += sign * s;
        }
    }
}

/// Per-step closed-loop matrices `A_t − B_tK_t − D_tL_t` and stage weights
/// `Q_t + K_tᵀRᵘK_t − L_tᵀRʷL_t` (the last weight is `Q_N`).
#[derive(Debug, Clone)]
pub(crate) struct ClosedLoop {
    acl: Vec<f64>,
    w: Vec<f64>,
    tmp: Vec<f64>,
}

impl ClosedLoop {
    pub fn new(fs: &FlatSystem) -> Self {
        let mm = fs.m * fs.m;
        Self {
            acl: vec![0.0; fs.horizon * mm],
            w: vec![0.0; (fs.horizon + 1) * mm],
            tmp: vec![0.0; fs.d.max(fs.n) * fs.m],
        }
    }

    pub fn fill(&mut self, fs: &FlatSystem, k: &[f64], l: &[f64]) {
        let (m, d, n) = (fs.m, fs.d, fs.n);
        let mm = m * m;
        for t in 0..fs.horizon {
            let kt = &k[t * d * m..(t + 1) * d * m];
            let lt = &l[t * n * m..(t + 1) * n * m];
            let acl = &mut self.acl[t * mm..(t + 1) * mm];
            acl.copy_from_slice(&fs.a[t]);
            for i in 0..m {
                for j in 0..m {
                    let mut s = 0.0;
                    for c in 0..d {
                        s += fs.b[t][i * d + c] * kt[c * m + j];
                    }
                    for c in 0..n {
                        s += fs.dd[t][i * n + c] * lt[c * m + j];
                    }
                    acl[i * m + j] -= s;
                }
            }
            let w = &mut self.w[t * mm..(t + 1) * mm];
            w.copy_from_slice(&fs.q[t]);
            add_gram(w, kt, &fs.ru[t], d, m, 1.0, &mut self.tmp);
            add_gram(w, lt, &fs.rw[t], n, m, -1.0, &mut self.tmp);
        }
        let h = fs.horizon;
        self.w[h * mm..].copy_from_slice(&fs.q[h]);
    }
}

/// Draws `x₀, ξ₀, …` from a [`NoiseModel`] into caller buffers.
#[derive(Debug, Clone)]
pub(crate) struct NoiseSampler {
    m: usize,
    sqrt: Vec<f64>,
    kind: NoiseKind,
    scale: f64,
    z: Vec<f64>,
}

impl NoiseSampler {
    pub fn new(noise: &NoiseModel) -> Self {
        let m = noise.dim();
        let scale = match noise.kind() {
            NoiseKind::Sphere => (m as f64).sqrt(),
            NoiseKind::TruncatedGaussian { .. } => 1.0 / noise.trunc_var().sqrt(),
        };
        Self { m, sqrt: flat(noise.sqrt_sigma()), kind: noise.kind(), scale, z: vec![0.0; m] }
    }

    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) {
        let m = self.m;
        match self.kind {
            NoiseKind::Sphere => loop {
                let mut nrm = 0.0;
                for zi in self.z.iter_mut() {
                    *zi = rng.sample(StandardNormal);
                    nrm += *zi * *zi;
                }
                if nrm > 0.0 {
                    let inv = 1.0 / nrm.sqrt();
                    self.z.iter_mut().for_each(|zi| *zi *= inv);
                    break;
                }
            },
            NoiseKind::TruncatedGaussian { clip } => loop {
                let mut nrm = 0.0;
                for zi in self.z.iter_mut() {
                    *zi = rng.sample(StandardNormal);
                    nrm += *zi * *zi;
                }
                if nrm <= clip * clip {
                    break;
                }
            },
        }
        for i in 0..m {
            let mut s = 0.0;
            for j in 0..m {
                s += self.sqrt[i * m + j] * self.z[j];
            }
            out[i] = self.scale * s;
        }
    }
}

fn quad(w: &[f64], x: &[f64], m: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..m {
        let mut r = 0.0;
        for j in 0..m {
            r += w[i * m + j] * x[j];
        }
        s += x[i] * r;
    }
    s
}

/// Scratch state for one rollout at a time.
#[derive(Debug, Clone)]
pub(crate) struct Roller {
    x: Vec<f64>,
    y: Vec<f64>,
    xi: Vec<f64>,
}

impl Roller {
    pub fn new(m: usize) -> Self {
        Self { x: vec![0.0; m], y: vec![0.0; m], xi: vec![0.0; m] }
    }

    /// Total cost of one trajectory with fresh noise; when `second` is given,
    /// `x_t x_tᵀ` is accumulated into its `t`-th flat block.
    pub fn run<R: Rng + ?Sized>(
        &mut self,
        fs: &FlatSystem,
        cl: &ClosedLoop,
        sampler: &mut NoiseSampler,
        rng: &mut R,
        mut second: Option<&mut [f64]>,
    ) -> f64 {
        let m = fs.m;
        let mm = m * m;
        sampler.draw(rng, &mut self.x);
        let mut cost = 0.0;
        for t in 0..=fs.horizon {
            if t > 0 {
                let acl = &cl.acl[(t - 1) * mm..t * mm];
                sampler.draw(rng, &mut self.xi);
                for i in 0..m {
                    let mut s = self.xi[i];
                    for j in 0..m {
                        s += acl[i * m + j] * self.x[j];
                    }
                    self.y[i] = s;
                }
                std::mem::swap(&mut self.x, &mut self.y);
            }
            cost += quad(&cl.w[t * mm..(t + 1) * mm], &self.x, m);
            if let Some(acc) = second.as_deref_mut() {
                let blk = &mut acc[t * mm..(t + 1) * mm];
                for i in 0..m {
                    for j in 0..m {
                        blk[i * m + j] += self.x[i] * self.x[j];
                    }
                }
            }
        }
        cost
    }
}

/// Fills `out` with an isotropic unit vector (Gaussian fill, normalised).
pub(crate) fn unit_vector<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut nrm = 0.0;
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
            nrm += *v * *v;
        }
        if nrm > 0.0 {
            let inv = 1.0 / nrm.sqrt();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::random::{random_feasible_k, random_l, random_system, RandomShape};
    use crate::lq_core::CompactGame;
    use crate::zo_est::sampling::{draw_noise, rollout};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_matches_reference_rollout() {
        let sys = random_system(8, RandomShape { horizon: 4, m: 3, d: 2, n: 2 });
        let g = CompactGame::new(&sys);
        let (k, l) = (random_feasible_k(&g, 8, 0.3), random_l(&g, 8, 0.4));
        let fs = FlatSystem::new(&sys);
        let mut cl = ClosedLoop::new(&fs);
        cl.fill(&fs, &k.to_flat(), &l.to_flat());
        let mut sampler = NoiseSampler::new(sys.noise());
        let mut roller = Roller::new(fs.m);
        for seed in 0..20 {
            let mut second = vec![0.0; (fs.horizon + 1) * fs.m * fs.m];
            let fast = roller.run(&fs, &cl, &mut sampler, &mut ChaCha8Rng::seed_from_u64(seed), Some(&mut second));
            let draw = draw_noise(sys.noise(), fs.horizon, &mut ChaCha8Rng::seed_from_u64(seed));
            let slow = rollout(&sys, &k, &l, &draw).unwrap();
            assert!((fast - slow.total).abs() <= 1e-10 * slow.total.abs().max(1.0));
            let x = &slow.states[fs.horizon];
            let last = &second[fs.horizon * fs.m * fs.m..];
            for i in 0..fs.m {
                for j in 0..fs.m {
                    assert!((last[i * fs.m + j] - x[i] * x[j]).abs() <= 1e-10);
                }
            }
        }
    }
}

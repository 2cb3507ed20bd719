use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{LqError, Result};
use crate::linalg::{frob_dot, max_eig, min_eig, spectral_norm, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Player {
    /// Minimising controller, gain `K`.
    Controller,
    /// Maximising disturbance, gain `L`.
    Disturbance,
}

/// One feedback block per time step; `u_t = -K_t x_t` / `w_t = -L_t x_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSchedule {
    player: Player,
    blocks: Vec<Mat>,
}

impl GainSchedule {
    pub fn new(player: Player, blocks: Vec<Mat>) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| LqError::Dimension("gain schedule needs at least one block".into()))?;
        let shape = first.shape();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(LqError::Dimension("empty gain block".into()));
        }
        for (t, b) in blocks.iter().enumerate() {
            if b.shape() != shape {
                return Err(LqError::Dimension(format!(
                    "gain block {t} is {}x{}, expected {}x{}",
                    b.nrows(),
                    b.ncols(),
                    shape.0,
                    shape.1
                )));
            }
            if !b.iter().all(|x| x.is_finite()) {
                return Err(LqError::InvalidParameter(format!("gain block {t} has non-finite entries")));
            }
        }
        Ok(Self { player, blocks })
    }

    pub fn zeros(player: Player, rows: usize, state_dim: usize, horizon: usize) -> Self {
        Self { player, blocks: vec![Mat::zeros(rows, state_dim); horizon] }
    }

    pub fn constant(player: Player, block: Mat, horizon: usize) -> Result<Self> {
        Self::new(player, vec![block; horizon])
    }

    /// Gaussian fill on the block pattern, normalised to unit Frobenius norm.
    pub fn random_unit<R: Rng + ?Sized>(player: Player, rows: usize, state_dim: usize, horizon: usize, rng: &mut R) -> Self {
        loop {
            let blocks: Vec<Mat> = (0..horizon)
                .map(|_| Mat::from_fn(rows, state_dim, |_, _| rng.sample::<f64, _>(StandardNormal)))
                .collect();
            let s = Self { player, blocks };
            let n = s.norm();
            if n > 0.0 {
                return s.scale(1.0 / n);
            }
        }
    }

    pub fn player(&self) -> Player {
        self.player
    }
    pub fn blocks(&self) -> &[Mat] {
        &self.blocks
    }
    pub fn block(&self, t: usize) -> &Mat {
        &self.blocks[t]
    }
    pub fn horizon(&self) -> usize {
        self.blocks.len()
    }
    pub fn rows(&self) -> usize {
        self.blocks[0].nrows()
    }
    pub fn state_dim(&self) -> usize {
        self.blocks[0].ncols()
    }
    /// Degrees of freedom: `rows · m · N`.
    pub fn dof(&self) -> usize {
        self.rows() * self.state_dim() * self.horizon()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.horizon() == other.horizon() && self.blocks[0].shape() == other.blocks[0].shape()
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&Mat, &Mat) -> Mat) -> Self {
        assert!(self.same_shape(other), "gain schedules of different shapes");
        Self { player: self.player, blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| f(a, b)).collect() }
    }

    pub fn map_blocks(&self, f: impl Fn(usize, &Mat) -> Mat) -> Self {
        Self { player: self.player, blocks: self.blocks.iter().enumerate().map(|(t, b)| f(t, b)).collect() }
    }

    /// `self + alpha · other`.
    pub fn axpy(&self, alpha: f64, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b * alpha)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_blocks(|_, b| b * s)
    }

    /// Elementwise midpoint `(self + other)/2`.
    pub fn midpoint(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| (a + b) * 0.5)
    }

    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        assert!(self.same_shape(other), "gain schedules of different shapes");
        self.blocks.iter().zip(&other.blocks).map(|(a, b)| frob_dot(a, b)).sum()
    }

    pub fn cosine(&self, other: &Self) -> f64 {
        self.dot(other) / (self.norm() * other.norm())
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    /// Flattened entries, block by block, row-major inside each block.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dof());
        for b in &self.blocks {
            for i in 0..b.nrows() {
                for j in 0..b.ncols() {
                    out.push(b[(i, j)]);
                }
            }
        }
        out
    }

    pub fn from_flat_like(&self, flat: &[f64]) -> Self {
        assert_eq!(flat.len(), self.dof());
        let (r, c) = self.blocks[0].shape();
        let blocks = (0..self.horizon())
            .map(|t| Mat::from_fn(r, c, |i, j| flat[t * r * c + i * c + j]))
            .collect();
        Self { player: self.player, blocks }
    }

    /// Lifted `rows·N × m(N+1)` matrix: block diagonal with a trailing zero
    /// column block.
    pub fn to_compact(&self) -> Mat {
        let (r, m, n) = (self.rows(), self.state_dim(), self.horizon());
        let mut out = Mat::zeros(r * n, m * (n + 1));
        for (t, b) in self.blocks.iter().enumerate() {
            out.view_mut((t * r, t * m), (r, m)).copy_from(b);
        }
        out
    }

    /// Inverse of [`to_compact`](Self::to_compact). Entries off the block
    /// pattern must vanish (up to `1e-12` relative to the matrix scale).
    pub fn from_compact(player: Player, mat: &Mat, rows: usize, state_dim: usize, horizon: usize) -> Result<Self> {
        if mat.shape() != (rows * horizon, state_dim * (horizon + 1)) {
            return Err(LqError::Dimension(format!(
                "compact gain is {}x{}, expected {}x{}",
                mat.nrows(),
                mat.ncols(),
                rows * horizon,
                state_dim * (horizon + 1)
            )));
        }
        let mut masked = mat.clone();
        let mut blocks = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let v = mat.view((t * rows, t * state_dim), (rows, state_dim)).into_owned();
            masked.view_mut((t * rows, t * state_dim), (rows, state_dim)).fill(0.0);
            blocks.push(v);
        }
        let off = masked.amax();
        if off > 1e-12 * mat.amax().max(1.0) {
            return Err(LqError::Dimension(format!("compact gain has off-pattern entries (max {off:.3e})")));
        }
        Self::new(player, blocks)
    }
}

/// Block-diagonal symmetric matrix stored by its `m×m` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiag {
    pub blocks: Vec<Mat>,
}

impl BlockDiag {
    pub fn new(blocks: Vec<Mat>) -> Self {
        Self { blocks }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn to_dense(&self) -> Mat {
        let rows: usize = self.blocks.iter().map(|b| b.nrows()).sum();
        let cols: usize = self.blocks.iter().map(|b| b.ncols()).sum();
        let mut out = Mat::zeros(rows, cols);
        let (mut r, mut c) = (0, 0);
        for b in &self.blocks {
            out.view_mut((r, c), b.shape()).copy_from(b);
            r += b.nrows();
            c += b.ncols();
        }
        out
    }

    pub fn trace(&self) -> f64 {
        self.blocks.iter().map(|b| b.trace()).sum()
    }

    pub fn min_eig(&self) -> f64 {
        self.blocks.iter().map(min_eig).fold(f64::INFINITY, f64::min)
    }

    pub fn max_eig(&self) -> f64 {
        self.blocks.iter().map(max_eig).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn spectral_norm(&self) -> f64 {
        self.blocks.iter().map(spectral_norm).fold(0.0, f64::max)
    }

    pub fn frob_norm(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt()
    }

    /// Blockwise `self - other`.
    pub fn sub(&self, other: &Self) -> Self {
        Self { blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a - b).collect() }
    }
}

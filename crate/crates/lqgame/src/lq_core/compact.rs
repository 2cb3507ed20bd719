use crate::error::{LqError, Result};
use crate::linalg::Mat;

use super::gains::{GainSchedule, Player};
use super::system::TimeVaryingSystem;

/// Lifted ("compact") form of a game. All recursions in this crate run on
/// the per-step blocks held in `system`; the lifted matrices exist for
/// cross-checks and for callers that want the stacked formulation.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactGame {
    system: TimeVaryingSystem,
    pub block_a: Mat,
    pub block_b: Mat,
    pub block_d: Mat,
    pub block_q: Mat,
    pub block_ru: Mat,
    pub block_rw: Mat,
    pub sigma0: Mat,
}

pub fn compactify(sys: &TimeVaryingSystem) -> Result<CompactGame> {
    let n = sys.horizon();
    let (m, du, dw) = (sys.state_dim(), sys.control_dim(), sys.disturbance_dim());
    let big = m * (n + 1);
    let mut block_a = Mat::zeros(big, big);
    let mut block_b = Mat::zeros(big, du * n);
    let mut block_d = Mat::zeros(big, dw * n);
    let mut block_q = Mat::zeros(big, big);
    let mut block_ru = Mat::zeros(du * n, du * n);
    let mut block_rw = Mat::zeros(dw * n, dw * n);
    let mut sigma0 = Mat::zeros(big, big);
    for t in 0..n {
        block_a.view_mut(((t + 1) * m, t * m), (m, m)).copy_from(&sys.a()[t]);
        block_b.view_mut(((t + 1) * m, t * du), (m, du)).copy_from(&sys.b()[t]);
        block_d.view_mut(((t + 1) * m, t * dw), (m, dw)).copy_from(&sys.d()[t]);
        block_ru.view_mut((t * du, t * du), (du, du)).copy_from(&sys.ru()[t]);
        block_rw.view_mut((t * dw, t * dw), (dw, dw)).copy_from(&sys.rw()[t]);
    }
    for t in 0..=n {
        block_q.view_mut((t * m, t * m), (m, m)).copy_from(&sys.q()[t]);
        sigma0.view_mut((t * m, t * m), (m, m)).copy_from(sys.noise().sigma0_step());
    }
    Ok(CompactGame { system: sys.clone(), block_a, block_b, block_d, block_q, block_ru, block_rw, sigma0 })
}

impl CompactGame {
    pub fn new(sys: &TimeVaryingSystem) -> Self {
        compactify(sys).expect("validated system")
    }

    pub fn system(&self) -> &TimeVaryingSystem {
        &self.system
    }
    pub fn horizon(&self) -> usize {
        self.system.horizon()
    }
    pub fn state_dim(&self) -> usize {
        self.system.state_dim()
    }
    pub fn control_dim(&self) -> usize {
        self.system.control_dim()
    }
    pub fn disturbance_dim(&self) -> usize {
        self.system.disturbance_dim()
    }
    /// `λ_min(Σ₀)`.
    pub fn phi(&self) -> f64 {
        self.system.noise().phi()
    }

    pub fn zero_k(&self) -> GainSchedule {
        GainSchedule::zeros(Player::Controller, self.control_dim(), self.state_dim(), self.horizon())
    }

    pub fn zero_l(&self) -> GainSchedule {
        GainSchedule::zeros(Player::Disturbance, self.disturbance_dim(), self.state_dim(), self.horizon())
    }

    /// Checks that `k`/`l` fit the game.
    pub fn check_gains(&self, k: &GainSchedule, l: &GainSchedule) -> Result<()> {
        let (m, n) = (self.state_dim(), self.horizon());
        let ok_k = k.horizon() == n && k.rows() == self.control_dim() && k.state_dim() == m;
        let ok_l = l.horizon() == n && l.rows() == self.disturbance_dim() && l.state_dim() == m;
        if !(ok_k && ok_l) {
            return Err(LqError::Dimension(format!(
                "gains {}x{}x{} / {}x{}x{} do not fit game with N={n}, m={m}, d={}, n={}",
                k.horizon(),
                k.rows(),
                k.state_dim(),
                l.horizon(),
                l.rows(),
                l.state_dim(),
                self.control_dim(),
                self.disturbance_dim()
            )));
        }
        Ok(())
    }

    pub fn check_k(&self, k: &GainSchedule) -> Result<()> {
        self.check_gains(k, &self.zero_l())
    }

    /// Recovers the per-step system from the lifted blocks.
    pub fn extract_system(&self) -> Result<TimeVaryingSystem> {
        let n = self.horizon();
        let (m, du, dw) = (self.state_dim(), self.control_dim(), self.disturbance_dim());
        let blk = |mat: &Mat, r: usize, c: usize, h: usize, w: usize| mat.view((r, c), (h, w)).into_owned();
        TimeVaryingSystem::new(
            (0..n).map(|t| blk(&self.block_a, (t + 1) * m, t * m, m, m)).collect(),
            (0..n).map(|t| blk(&self.block_b, (t + 1) * m, t * du, m, du)).collect(),
            (0..n).map(|t| blk(&self.block_d, (t + 1) * m, t * dw, m, dw)).collect(),
            (0..=n).map(|t| blk(&self.block_q, t * m, t * m, m, m)).collect(),
            (0..n).map(|t| blk(&self.block_ru, t * du, t * du, du, du)).collect(),
            (0..n).map(|t| blk(&self.block_rw, t * dw, t * dw, dw, dw)).collect(),
            self.system.noise().clone(),
        )
    }

    /// Lifted closed-loop matrix `𝐀 − 𝐁𝐊 − 𝐃𝐋`.
    pub fn closed_loop(&self, k: &GainSchedule, l: &GainSchedule) -> Mat {
        &self.block_a - &self.block_b * k.to_compact() - &self.block_d * l.to_compact()
    }
}

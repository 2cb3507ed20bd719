use serde::{Deserialize, Serialize};

use crate::error::{LqError, Result};
use crate::lq_core::CompactGame;

/// Smallest accepted smoothing radius.
pub const MIN_RADIUS: f64 = 1e-12;

/// Batch sizes, radii and iteration budgets of the zeroth-order methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoConfig {
    pub m1: usize,
    pub m2: usize,
    pub r1: f64,
    pub r2: f64,
    pub eta: f64,
    pub alpha: f64,
    pub inner_iters: usize,
    pub outer_iters: usize,
    pub eps1: f64,
    pub eps2: f64,
    pub seed: u64,
    /// Compare against exact model quantities (true gap, estimator cosine).
    #[serde(default)]
    pub validation: bool,
}

impl ZoConfig {
    /// `d₁ = n·m·N`.
    pub fn d1(game: &CompactGame) -> usize {
        game.disturbance_dim() * game.state_dim() * game.horizon()
    }

    /// `d₂ = d·m·N`.
    pub fn d2(game: &CompactGame) -> usize {
        game.control_dim() * game.state_dim() * game.horizon()
    }

    pub fn validate(&self) -> Result<()> {
        if self.m1 == 0 || self.m2 == 0 {
            return Err(LqError::InvalidParameter("batch sizes must be at least 1".into()));
        }
        for (x, name) in [(self.r1, "r1"), (self.r2, "r2")] {
            if !(x.is_finite() && x >= MIN_RADIUS) {
                return Err(LqError::InvalidParameter(format!("smoothing radius {name} = {x} is below {MIN_RADIUS:e}")));
            }
        }
        for (x, name) in [(self.eta, "eta"), (self.alpha, "alpha"), (self.eps1, "eps1"), (self.eps2, "eps2")] {
            if !(x.is_finite() && x > 0.0) {
                return Err(LqError::InvalidParameter(format!("{name} must be positive, got {x}")));
            }
        }
        Ok(())
    }
}

use alloc::vec;
use alloc::vec::Vec;

use super::Parameters;

/// Normalized observations are clipped into `[0, STATE_CLIP]`.
pub const STATE_CLIP: f64 = 2.0;
/// Rewards are clipped into `[-REWARD_CLIP, REWARD_CLIP]`.
pub const REWARD_CLIP: f64 = 2.0;
/// Global gradient-norm cap per network per learning step.
pub const DEFAULT_GRADIENT_CAP: f64 = 40.0;

pub fn clip_states(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.clamp(0.0, STATE_CLIP)).collect()
}

pub fn clip_reward(r: f64) -> f64 {
    r.clamp(-REWARD_CLIP, REWARD_CLIP)
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`. Returns
/// the norm before capping.
pub fn cap_gradients<P: Parameters + ?Sized>(grads: &mut P, max_norm: f64) -> f64 {
    let norm = grads.l2_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
        // Rounding can leave the result a few ulps above the cap.
        while grads.l2_norm() > max_norm {
            grads.scale(1.0 - 4.0 * f64::EPSILON);
        }
    }
    norm
}

/// RMSprop: `acc ← ρ·acc + (1−ρ)·g²`, `p ← p − η·g / √(acc + ε)`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    pub accumulator: Vec<f64>,
}

impl RmsProp {
    pub const DEFAULT_DECAY: f64 = 0.99;
    pub const DEFAULT_EPSILON: f64 = 1e-5;

    pub fn new(learning_rate: f64, param_count: usize) -> Self {
        Self::with_params(learning_rate, Self::DEFAULT_DECAY, Self::DEFAULT_EPSILON, param_count)
    }

    pub fn with_params(learning_rate: f64, decay: f64, epsilon: f64, param_count: usize) -> Self {
        Self { learning_rate, decay, epsilon, accumulator: vec![0.0; param_count] }
    }

    /// Applies one update. Panics if `grads` and `params` differ in size
    /// from the accumulator.
    pub fn update<P: Parameters + ?Sized>(&mut self, params: &mut P, grads: &P) {
        let g = grads.to_flat();
        assert_eq!(g.len(), self.accumulator.len(), "gradient size does not match optimizer state");
        let (rho, eta, eps) = (self.decay, self.learning_rate, self.epsilon);
        for (a, gi) in self.accumulator.iter_mut().zip(&g) {
            *a = rho * *a + (1.0 - rho) * gi * gi;
        }
        let mut offset = 0;
        let acc = &self.accumulator;
        params.visit_mut(&mut |s| {
            for (k, p) in s.iter_mut().enumerate() {
                let i = offset + k;
                *p -= eta * g[i] / libm::sqrt(acc[i] + eps);
            }
            offset += s.len();
        });
        assert_eq!(offset, g.len(), "parameter size does not match optimizer state");
    }
}

//! Small from-scratch neural engine: dense and LSTM layers, the recurrent
//! actor/critic network, a feed-forward MLP for the Q-learning baseline,
//! orthogonal initialization, RMSprop and the clipping rules.

mod dense;
mod init;
mod lstm;
mod mlp;
mod optim;
mod recurrent;

use alloc::vec::Vec;

pub use dense::{Activation, Dense};
pub use init::orthogonal_init;
pub use lstm::{Lstm, LstmCarry, LstmCache};
pub use mlp::{Mlp, MlpTape};
pub use optim::{cap_gradients, clip_reward, clip_states, RmsProp, DEFAULT_GRADIENT_CAP, REWARD_CLIP, STATE_CLIP};
pub use recurrent::{Head, NetShape, RecurrentNet, Tape};

use crate::{Error, Result};

/// Anything holding trainable `f64` parameters in a fixed traversal order.
///
/// Gradients are stored in a value of the same type, so optimizers and
/// checkpoints can walk parameters and gradients in lock step.
pub trait Parameters {
    fn visit(&self, f: &mut dyn FnMut(&[f64]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64]));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |s| n += s.len());
        n
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit(&mut |s| out.extend_from_slice(s));
        out
    }

    fn load_flat(&mut self, values: &[f64]) -> Result<()> {
        let expected = self.param_count();
        if values.len() != expected {
            return Err(Error::ShapeMismatch { expected, actual: values.len() });
        }
        let mut offset = 0;
        self.visit_mut(&mut |s| {
            s.copy_from_slice(&values[offset..offset + s.len()]);
            offset += s.len();
        });
        Ok(())
    }

    fn l2_norm(&self) -> f64 {
        let mut sq = 0.0;
        self.visit(&mut |s| sq += crate::math::dot(s, s));
        libm::sqrt(sq)
    }

    fn scale(&mut self, k: f64) {
        self.visit_mut(&mut |s| s.iter_mut().for_each(|v| *v *= k));
    }

    fn digest(&self) -> u64 {
        crate::math::digest(&self.to_flat())
    }
}

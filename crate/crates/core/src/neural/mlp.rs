use alloc::vec::Vec;

use rand::Rng;

use super::{Dense, Parameters};
use crate::{Error, Result};

/// Feed-forward network: ReLU hidden layers, linear output.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations of one forward pass, input first.
#[derive(Clone, Debug)]
pub struct MlpTape {
    activations: Vec<Vec<f64>>,
}

impl MlpTape {
    pub fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    /// `sizes = [inputs, hidden…, outputs]`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let layers = sizes.windows(2).map(|w| Dense::orthogonal(w[0], w[1], 1.0, rng)).collect();
        Self { layers }
    }

    pub fn inputs(&self) -> usize {
        self.layers.first().map_or(0, Dense::inputs)
    }

    pub fn forward(&self, x: &[f64]) -> Result<MlpTape> {
        if x.len() != self.inputs() {
            return Err(Error::ShapeMismatch { expected: self.inputs(), actual: x.len() });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.affine(&activations[i]);
            if i < last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            activations.push(z);
        }
        Ok(MlpTape { activations })
    }

    /// Gradients for a loss whose derivative with respect to the output is
    /// `d_out`.
    pub fn backward(&self, tape: &MlpTape, d_out: &[f64]) -> Mlp {
        let mut grad = self.clone();
        grad.visit_mut(&mut |s| s.fill(0.0));
        let mut delta = d_out.to_vec();
        for i in (0..self.layers.len()).rev() {
            let dx = self.layers[i].backward_acc(&tape.activations[i], &delta, &mut grad.layers[i], i > 0);
            if let Some(mut dx) = dx {
                for (d, &a) in dx.iter_mut().zip(&tape.activations[i]) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
                delta = dx;
            }
        }
        grad
    }
}

impl Parameters for Mlp {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.layers.iter().for_each(|l| l.visit(f));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.layers.iter_mut().for_each(|l| l.visit_mut(f));
    }
}

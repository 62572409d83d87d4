use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{orthogonal_init, Parameters};
use crate::math::{softmax, Matrix};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
    Softmax,
}

/// Fully connected layer `y = act(W x + b)` with `W` of shape `out × in`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { weight: Matrix::zeros(outputs, inputs), bias: vec![0.0; outputs] }
    }

    /// Orthogonal weights, zero bias.
    pub fn orthogonal<R: Rng + ?Sized>(inputs: usize, outputs: usize, gain: f64, rng: &mut R) -> Self {
        Self { weight: orthogonal_init(outputs, inputs, gain, rng), bias: vec![0.0; outputs] }
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    /// `W x + b`.
    pub fn affine(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        self.weight.mul_vec_acc(x, &mut out);
        out
    }

    pub fn forward(&self, x: &[f64], activation: Activation) -> Result<Vec<f64>> {
        if x.len() != self.inputs() {
            return Err(Error::ShapeMismatch { expected: self.inputs(), actual: x.len() });
        }
        let z = self.affine(x);
        Ok(match activation {
            Activation::Relu => z.into_iter().map(|v| v.max(0.0)).collect(),
            Activation::Linear => z,
            Activation::Softmax => softmax(&z),
        })
    }

    /// Accumulates `dW += dz xᵀ`, `db += dz` into `grad` and returns `Wᵀ dz`
    /// (or nothing when `want_input_grad` is false).
    pub(crate) fn backward_acc(&self, x: &[f64], dz: &[f64], grad: &mut Dense, want_input_grad: bool) -> Option<Vec<f64>> {
        grad.weight.add_outer(dz, x);
        for (b, d) in grad.bias.iter_mut().zip(dz) {
            *b += d;
        }
        want_input_grad.then(|| {
            let mut dx = vec![0.0; self.inputs()];
            self.weight.mul_transpose_vec_acc(dz, &mut dx);
            dx
        })
    }
}

impl Parameters for Dense {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        f(self.weight.as_slice());
        f(&self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        f(self.weight.as_mut_slice());
        f(&mut self.bias);
    }
}

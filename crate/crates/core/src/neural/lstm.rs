use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{orthogonal_init, Parameters};
use crate::math::{sigmoid, tanh, Matrix};

/// LSTM cell. Gate rows are stacked in the order input, forget, output,
/// candidate; each block is `hidden` rows tall.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Lstm {
    /// `4H × inputs`.
    pub w_input: Matrix,
    /// `4H × H`.
    pub w_hidden: Matrix,
    /// `4H`.
    pub bias: Vec<f64>,
}

/// Recurrent state carried between steps.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LstmCarry {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmCarry {
    pub fn zeros(hidden: usize) -> Self {
        Self { h: vec![0.0; hidden], c: vec![0.0; hidden] }
    }
}

/// Everything one step needs for its backward pass.
#[derive(Clone, Debug)]
pub struct LstmCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Post-activation gates, `4H`.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

impl Lstm {
    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        Self { w_input: Matrix::zeros(4 * hidden, inputs), w_hidden: Matrix::zeros(4 * hidden, hidden), bias: vec![0.0; 4 * hidden] }
    }

    /// Each gate block orthogonal on its own; zero bias.
    pub fn orthogonal<R: Rng + ?Sized>(inputs: usize, hidden: usize, gain: f64, rng: &mut R) -> Self {
        let mut cell = Self::zeros(inputs, hidden);
        for gate in 0..4 {
            let wx = orthogonal_init(hidden, inputs, gain, rng);
            let wh = orthogonal_init(hidden, hidden, gain, rng);
            for r in 0..hidden {
                for c in 0..inputs {
                    cell.w_input.set(gate * hidden + r, c, wx.get(r, c));
                }
                for c in 0..hidden {
                    cell.w_hidden.set(gate * hidden + r, c, wh.get(r, c));
                }
            }
        }
        cell
    }

    pub fn inputs(&self) -> usize {
        self.w_input.cols()
    }

    pub fn hidden(&self) -> usize {
        self.w_hidden.cols()
    }

    /// One step; the input carry is left untouched.
    pub fn step(&self, x: &[f64], carry: &LstmCarry) -> (Vec<f64>, LstmCarry) {
        let cache = self.step_cached(x, carry);
        (cache.h.clone(), LstmCarry { h: cache.h, c: cache.c })
    }

    pub fn step_cached(&self, x: &[f64], carry: &LstmCarry) -> LstmCache {
        let hs = self.hidden();
        let mut z = self.bias.clone();
        self.w_input.mul_vec_acc(x, &mut z);
        self.w_hidden.mul_vec_acc(&carry.h, &mut z);
        let (sig, cand) = z.split_at_mut(3 * hs);
        sig.iter_mut().for_each(|v| *v = sigmoid(*v));
        cand.iter_mut().for_each(|v| *v = tanh(*v));
        let gates = z;
        let mut c = vec![0.0; hs];
        let mut tanh_c = vec![0.0; hs];
        let mut h = vec![0.0; hs];
        for k in 0..hs {
            let (i, f, o, g) = (gates[k], gates[hs + k], gates[2 * hs + k], gates[3 * hs + k]);
            c[k] = f * carry.c[k] + i * g;
            tanh_c[k] = tanh(c[k]);
            h[k] = o * tanh_c[k];
        }
        LstmCache { x: x.to_vec(), h_prev: carry.h.clone(), c_prev: carry.c.clone(), gates, c, tanh_c, h }
    }

    /// Backward through one step given `dL/dh` and `dL/dc` flowing into it.
    /// Accumulates parameter gradients into `grad`; returns
    /// `(dL/dx, dL/dh_prev, dL/dc_prev)`.
    pub fn backward_step(&self, cache: &LstmCache, dh: &[f64], dc_in: &[f64], grad: &mut Lstm) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hs = self.hidden();
        let g = &cache.gates;
        let mut dz = vec![0.0; 4 * hs];
        let mut dc_prev = vec![0.0; hs];
        for k in 0..hs {
            let (i, f, o, cand) = (g[k], g[hs + k], g[2 * hs + k], g[3 * hs + k]);
            let tc = cache.tanh_c[k];
            let dc = dh[k] * o * (1.0 - tc * tc) + dc_in[k];
            let d_o = dh[k] * tc;
            let d_i = dc * cand;
            let d_f = dc * cache.c_prev[k];
            let d_g = dc * i;
            dc_prev[k] = dc * f;
            dz[k] = d_i * i * (1.0 - i);
            dz[hs + k] = d_f * f * (1.0 - f);
            dz[2 * hs + k] = d_o * o * (1.0 - o);
            dz[3 * hs + k] = d_g * (1.0 - cand * cand);
        }
        grad.w_input.add_outer(&dz, &cache.x);
        grad.w_hidden.add_outer(&dz, &cache.h_prev);
        for (b, d) in grad.bias.iter_mut().zip(&dz) {
            *b += d;
        }
        let mut dx = vec![0.0; self.inputs()];
        self.w_input.mul_transpose_vec_acc(&dz, &mut dx);
        let mut dh_prev = vec![0.0; hs];
        self.w_hidden.mul_transpose_vec_acc(&dz, &mut dh_prev);
        (dx, dh_prev, dc_prev)
    }
}

impl Parameters for Lstm {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        f(self.w_input.as_slice());
        f(self.w_hidden.as_slice());
        f(&self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        f(self.w_input.as_mut_slice());
        f(self.w_hidden.as_mut_slice());
        f(&mut self.bias);
    }
}

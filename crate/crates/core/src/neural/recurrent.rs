//! The per-agent actor or critic network:
//!
//! ```text
//! waves ──► FC(relu) ─┐
//!                     ├─► LSTM ─► head (softmax policy | linear value)
//! fingerprints ► FC(relu) ┘   (fingerprint branch only when present)
//! ```

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{Dense, Lstm, LstmCache, LstmCarry, Parameters};
use crate::math::softmax;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetShape {
    pub wave_inputs: usize,
    /// Zero disables the fingerprint branch.
    pub fingerprint_inputs: usize,
    pub fc_wave: usize,
    pub fc_fingerprint: usize,
    pub lstm: usize,
    pub outputs: usize,
}

impl NetShape {
    pub fn inputs(&self) -> usize {
        self.wave_inputs + self.fingerprint_inputs
    }

    fn lstm_inputs(&self) -> usize {
        self.fc_wave + if self.fingerprint_inputs > 0 { self.fc_fingerprint } else { 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Head {
    /// Softmax over actions.
    Policy,
    /// Single linear output.
    Value,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RecurrentNet {
    pub shape: NetShape,
    pub head_kind: Head,
    pub fc_wave: Dense,
    pub fc_fingerprint: Option<Dense>,
    pub lstm: Lstm,
    pub head: Dense,
}

#[derive(Clone, Debug)]
struct StepCache {
    input: Vec<f64>,
    fc_wave: Vec<f64>,
    fc_fingerprint: Vec<f64>,
    lstm: LstmCache,
    output: Vec<f64>,
}

/// Recorded forward pass over a sequence, consumed by
/// [`RecurrentNet::backward`].
#[derive(Clone, Debug)]
pub struct Tape {
    steps: Vec<StepCache>,
    pub start: LstmCarry,
    pub end: LstmCarry,
}

impl Tape {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Post-activation output at step `t` (probabilities or `[value]`).
    pub fn output(&self, t: usize) -> &[f64] {
        &self.steps[t].output
    }
}

fn relu(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| x.max(0.0)).collect()
}

fn relu_backward(post: &[f64], grad: &mut [f64]) {
    for (g, &p) in grad.iter_mut().zip(post) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
}

impl RecurrentNet {
    /// Orthogonal weights with gain 1, zero biases. Layers draw from `rng`
    /// in the order wave FC, fingerprint FC, LSTM, head.
    pub fn new<R: Rng + ?Sized>(shape: NetShape, head_kind: Head, rng: &mut R) -> Self {
        let fc_wave = Dense::orthogonal(shape.wave_inputs, shape.fc_wave, 1.0, rng);
        let fc_fingerprint =
            (shape.fingerprint_inputs > 0).then(|| Dense::orthogonal(shape.fingerprint_inputs, shape.fc_fingerprint, 1.0, rng));
        let lstm = Lstm::orthogonal(shape.lstm_inputs(), shape.lstm, 1.0, rng);
        let outputs = match head_kind {
            Head::Policy => shape.outputs,
            Head::Value => 1,
        };
        let head = Dense::orthogonal(shape.lstm, outputs, 1.0, rng);
        Self { shape, head_kind, fc_wave, fc_fingerprint, lstm, head }
    }

    /// Same shape, all parameters zero; used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.visit_mut(&mut |s| s.fill(0.0));
        z
    }

    pub fn initial_carry(&self) -> LstmCarry {
        LstmCarry::zeros(self.shape.lstm)
    }

    fn step_cached(&self, input: &[f64], carry: &LstmCarry) -> Result<StepCache> {
        if input.len() != self.shape.inputs() {
            return Err(Error::ShapeMismatch { expected: self.shape.inputs(), actual: input.len() });
        }
        let (wave, fp) = input.split_at(self.shape.wave_inputs);
        let fc_wave = relu(self.fc_wave.affine(wave));
        let fc_fingerprint = match &self.fc_fingerprint {
            Some(d) => relu(d.affine(fp)),
            None => Vec::new(),
        };
        let mut lstm_in = fc_wave.clone();
        lstm_in.extend_from_slice(&fc_fingerprint);
        let lstm = self.lstm.step_cached(&lstm_in, carry);
        let logits = self.head.affine(&lstm.h);
        let output = match self.head_kind {
            Head::Policy => softmax(&logits),
            Head::Value => logits,
        };
        Ok(StepCache { input: input.to_vec(), fc_wave, fc_fingerprint, lstm, output })
    }

    /// One step without recording. Returns the head output (probabilities
    /// or `[value]`) and the next carry; `carry` itself is not modified.
    pub fn step(&self, input: &[f64], carry: &LstmCarry) -> Result<(Vec<f64>, LstmCarry)> {
        let cache = self.step_cached(input, carry)?;
        Ok((cache.output, LstmCarry { h: cache.lstm.h, c: cache.lstm.c }))
    }

    pub fn forward_sequence(&self, inputs: &[Vec<f64>], start: &LstmCarry) -> Result<Tape> {
        let mut steps = Vec::with_capacity(inputs.len());
        let mut carry = start.clone();
        for x in inputs {
            let cache = self.step_cached(x, &carry)?;
            carry = LstmCarry { h: cache.lstm.h.clone(), c: cache.lstm.c.clone() };
            steps.push(cache);
        }
        Ok(Tape { steps, start: start.clone(), end: carry })
    }

    /// Backpropagation through time over a recorded tape.
    ///
    /// `head_grads[t]` is the loss gradient with respect to the head's
    /// pre-activation output at step `t` (the logits for a policy head, the
    /// value for a value head). Gradient into the starting carry is dropped,
    /// i.e. the sequence is truncated at the tape start.
    pub fn backward(&self, tape: &Tape, head_grads: &[Vec<f64>]) -> Result<RecurrentNet> {
        if head_grads.len() != tape.len() {
            return Err(Error::ShapeMismatch { expected: tape.len(), actual: head_grads.len() });
        }
        let mut grad = self.zeros_like();
        let hs = self.shape.lstm;
        let mut dh_next = vec![0.0; hs];
        let mut dc_next = vec![0.0; hs];
        for (step, d_out) in tape.steps.iter().zip(head_grads).rev() {
            if d_out.len() != self.head.outputs() {
                return Err(Error::ShapeMismatch { expected: self.head.outputs(), actual: d_out.len() });
            }
            let mut dh = self.head.backward_acc(&step.lstm.h, d_out, &mut grad.head, true).unwrap_or_default();
            for (a, b) in dh.iter_mut().zip(&dh_next) {
                *a += b;
            }
            let (dx, dh_prev, dc_prev) = self.lstm.backward_step(&step.lstm, &dh, &dc_next, &mut grad.lstm);
            dh_next = dh_prev;
            dc_next = dc_prev;

            let (d_wave, d_fp) = dx.split_at(self.shape.fc_wave);
            let (wave_in, fp_in) = step.input.split_at(self.shape.wave_inputs);
            let mut d_wave = d_wave.to_vec();
            relu_backward(&step.fc_wave, &mut d_wave);
            self.fc_wave.backward_acc(wave_in, &d_wave, &mut grad.fc_wave, false);
            if let (Some(layer), Some(g)) = (&self.fc_fingerprint, grad.fc_fingerprint.as_mut()) {
                let mut d_fp = d_fp.to_vec();
                relu_backward(&step.fc_fingerprint, &mut d_fp);
                layer.backward_acc(fp_in, &d_fp, g, false);
            }
        }
        Ok(grad)
    }
}

impl Parameters for RecurrentNet {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.fc_wave.visit(f);
        if let Some(d) = &self.fc_fingerprint {
            d.visit(f);
        }
        self.lstm.visit(f);
        self.head.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.fc_wave.visit_mut(f);
        if let Some(d) = &mut self.fc_fingerprint {
            d.visit_mut(f);
        }
        self.lstm.visit_mut(f);
        self.head.visit_mut(f);
    }
}

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::math::{argmax, dot, Matrix};
use crate::neural::{Mlp, Parameters};
use crate::error::invalid;
use crate::{Error, Result};

/// Exploration floor reached halfway through training.
pub const EPSILON_FINAL: f64 = 0.01;

/// Linear action values: `Q(s, u) = w_u · [s, 1]`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinearQ {
    /// One row per action; the last column is the bias.
    pub weights: Matrix,
}

impl LinearQ {
    pub fn zeros(features: usize, actions: usize) -> Self {
        Self { weights: Matrix::zeros(actions, features + 1) }
    }

    fn features(&self) -> usize {
        self.weights.cols() - 1
    }

    fn q(&self, s: &[f64], u: usize) -> f64 {
        let row = self.weights.row(u);
        dot(&row[..s.len()], s) + row[s.len()]
    }
}

impl Parameters for LinearQ {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        f(self.weights.as_slice());
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        f(self.weights.as_mut_slice());
    }
}

/// An independent Q-learner's regressor.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum QModel {
    Linear(LinearQ),
    /// Feed-forward net with one output per action.
    Deep(Mlp),
}

impl QModel {
    pub fn inputs(&self) -> usize {
        match self {
            QModel::Linear(q) => q.features(),
            QModel::Deep(m) => m.inputs(),
        }
    }

    pub fn q_values(&self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.inputs() {
            return Err(Error::ShapeMismatch { expected: self.inputs(), actual: s.len() });
        }
        match self {
            QModel::Linear(q) => Ok((0..q.weights.rows()).map(|u| q.q(s, u)).collect()),
            QModel::Deep(m) => Ok(m.forward(s)?.output().to_vec()),
        }
    }
}

impl Parameters for QModel {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        match self {
            QModel::Linear(q) => q.visit(f),
            QModel::Deep(m) => m.visit(f),
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        match self {
            QModel::Linear(q) => q.visit_mut(f),
            QModel::Deep(m) => m.visit_mut(f),
        }
    }
}

/// Exploration rate for `episode` of `total`: linear from 1 down to
/// [`EPSILON_FINAL`] over the first half, flat afterwards.
pub fn epsilon_schedule(episode: usize, total: usize) -> f64 {
    let half = (total as f64 / 2.0).max(1.0);
    let frac = episode as f64 / half;
    if frac >= 1.0 {
        return EPSILON_FINAL;
    }
    1.0 - frac * (1.0 - EPSILON_FINAL)
}

/// Uniform action with probability `epsilon`, otherwise the argmax.
pub fn epsilon_greedy<R: Rng + ?Sized>(q_values: &[f64], epsilon: f64, rng: &mut R) -> usize {
    let explore: f64 = rng.random();
    if explore < epsilon {
        rng.random_range(0..q_values.len())
    } else {
        argmax(q_values)
    }
}

/// One semi-gradient step on `½ (Q(s,u) − y)²` with
/// `y = r + γ max_u' Q(s',u')` (`y = r` when `next` is `None`). Returns the
/// TD error `y − Q(s,u)` before the step.
pub fn iql_update(
    q: &mut QModel,
    s: &[f64],
    u: usize,
    r: f64,
    next: Option<&[f64]>,
    gamma: f64,
    learning_rate: f64,
) -> Result<f64> {
    let target = match next {
        Some(s2) => {
            let v = q.q_values(s2)?;
            r + gamma * v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        }
        None => r,
    };
    match q {
        QModel::Linear(lin) => {
            if s.len() != lin.features() {
                return Err(Error::ShapeMismatch { expected: lin.features(), actual: s.len() });
            }
            let td = target - lin.q(s, u);
            let cols = lin.weights.cols();
            let row = &mut lin.weights.as_mut_slice()[u * cols..(u + 1) * cols];
            for (w, x) in row.iter_mut().zip(s.iter().chain(core::iter::once(&1.0))) {
                *w += learning_rate * td * x;
            }
            Ok(td)
        }
        QModel::Deep(m) => {
            let tape = m.forward(s)?;
            let out = tape.output();
            if u >= out.len() {
                return Err(invalid!("action {u} outside {} outputs", out.len()));
            }
            let td = target - out[u];
            let mut d_out = vec![0.0; out.len()];
            d_out[u] = -td;
            let grad = m.backward(&tape, &d_out);
            let g = grad.to_flat();
            let mut i = 0;
            m.visit_mut(&mut |slice| {
                for p in slice.iter_mut() {
                    *p -= learning_rate * g[i];
                    i += 1;
                }
            });
            Ok(td)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn gamma_zero_moves_toward_reward() {
        let mut q = QModel::Linear(LinearQ::zeros(1, 1));
        let s = [1.0];
        let mut last = f64::INFINITY;
        for _ in 0..20 {
            let td = iql_update(&mut q, &s, 0, 2.0, Some(&s), 0.0, 0.1).unwrap();
            assert!(td.abs() < last);
            last = td.abs();
        }
        assert!((q.q_values(&s).unwrap()[0] - 2.0).abs() < 0.1);
    }

    #[test]
    fn bellman_fixed_point() {
        let mut q = QModel::Linear(LinearQ::zeros(1, 1));
        let s = [0.0];
        for _ in 0..20000 {
            iql_update(&mut q, &s, 0, 1.0, Some(&s), 0.9, 0.1).unwrap();
        }
        assert!((q.q_values(&s).unwrap()[0] - 10.0).abs() < 1e-6);
    }

    #[test]
    fn deep_variant_reduces_td_error() {
        let mut q = QModel::Deep(Mlp::new(&[2, 8, 8, 2], &mut rng::stream(3, 0)));
        let s = [0.5, 1.0];
        let first = iql_update(&mut q, &s, 1, -1.0, None, 0.9, 0.05).unwrap().abs();
        for _ in 0..200 {
            iql_update(&mut q, &s, 1, -1.0, None, 0.9, 0.05).unwrap();
        }
        let last = iql_update(&mut q, &s, 1, -1.0, None, 0.9, 0.05).unwrap().abs();
        assert!(last < first * 0.01, "{first} -> {last}");
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut r = rng::stream(5, 0);
        let mut counts = [0usize; 4];
        let n = 40_000;
        for _ in 0..n {
            counts[epsilon_greedy(&[0.0, 9.0, 0.0, 0.0], 1.0, &mut r)] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.01, "{counts:?}");
        }
        assert_eq!(epsilon_greedy(&[0.0, 9.0, 0.0], 0.0, &mut r), 1);
    }

    #[test]
    fn epsilon_anneals_over_first_half() {
        assert_eq!(epsilon_schedule(0, 100), 1.0);
        assert!((epsilon_schedule(25, 100) - 0.505).abs() < 1e-12);
        assert_eq!(epsilon_schedule(50, 100), EPSILON_FINAL);
        assert_eq!(epsilon_schedule(99, 100), EPSILON_FINAL);
    }
}

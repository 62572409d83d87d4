use alloc::vec;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::{Error, Result};

/// `R_t = Σ_{τ=t}^{n−1} γ^{τ−t} r_τ + γ^{n−t} · bootstrap` for every `t`.
///
/// Pass `bootstrap = 0` when the batch ends the episode.
pub fn n_step_returns(rewards: &[f64], bootstrap: f64, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = bootstrap;
    for (o, &r) in out.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *o = acc;
    }
    out
}

/// `A_t = R_t − V(h_t)`.
pub fn advantages(returns: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    if returns.len() != values.len() {
        return Err(Error::ShapeMismatch { expected: returns.len(), actual: values.len() });
    }
    Ok(returns.iter().zip(values).map(|(r, v)| r - v).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActorLoss {
    pub loss: f64,
    /// Summed policy entropy over the batch.
    pub entropy: f64,
    /// Gradient of `loss` with respect to each step's logits.
    pub logit_grads: Vec<Vec<f64>>,
}

/// `−Σ_t log π(u_t) A_t − β Σ_t H(π_t)`, with its gradient with respect to
/// the logits. Advantages are constants.
pub fn actor_loss(policies: &[Vec<f64>], actions: &[usize], advantages: &[f64], beta: f64) -> Result<ActorLoss> {
    if policies.len() != actions.len() {
        return Err(Error::ShapeMismatch { expected: policies.len(), actual: actions.len() });
    }
    if policies.len() != advantages.len() {
        return Err(Error::ShapeMismatch { expected: policies.len(), actual: advantages.len() });
    }
    let mut loss = 0.0;
    let mut entropy = 0.0;
    let mut logit_grads = Vec::with_capacity(policies.len());
    for ((pi, &u), &a) in policies.iter().zip(actions).zip(advantages) {
        if u >= pi.len() {
            return Err(invalid!("action {u} outside a policy over {} actions", pi.len()));
        }
        let logp: Vec<f64> = pi.iter().map(|&p| libm::log(p.max(f64::MIN_POSITIVE))).collect();
        let h: f64 = -pi.iter().zip(&logp).map(|(p, l)| p * l).sum::<f64>();
        loss += -logp[u] * a - beta * h;
        entropy += h;
        let g = pi
            .iter()
            .zip(&logp)
            .enumerate()
            .map(|(k, (&p, &l))| {
                let onehot = if k == u { 1.0 } else { 0.0 };
                a * (p - onehot) + beta * p * (l + h)
            })
            .collect();
        logit_grads.push(g);
    }
    Ok(ActorLoss { loss, entropy, logit_grads })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticLoss {
    pub loss: f64,
    /// `V_t − R_t`, the gradient with respect to each value.
    pub value_grads: Vec<f64>,
}

/// `½ Σ_t (R_t − V_t)²`.
pub fn critic_loss(returns: &[f64], values: &[f64]) -> Result<CriticLoss> {
    if returns.len() != values.len() {
        return Err(Error::ShapeMismatch { expected: returns.len(), actual: values.len() });
    }
    let value_grads: Vec<f64> = values.iter().zip(returns).map(|(v, r)| v - r).collect();
    let loss = 0.5 * value_grads.iter().map(|d| d * d).sum::<f64>();
    Ok(CriticLoss { loss, value_grads })
}

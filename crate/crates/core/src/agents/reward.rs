use crate::microsim::Sim;
use crate::netmodel::{AgentGraph, AgentId};
use crate::neural::clip_reward;

/// Queue length (vehicles) that maps to a reward of −1.
pub const DEFAULT_REWARD_NORM: f64 = 25.0;

/// Turns a queue count into a clipped penalty: `clip(−queue / norm)`.
pub fn normalize_reward(queue: usize, norm: f64) -> f64 {
    clip_reward(-(queue as f64) / norm)
}

/// The agent's stopped-vehicle count as a normalized, clipped penalty.
pub fn local_reward(sim: &Sim<'_>, agent: AgentId, norm: f64) -> f64 {
    normalize_reward(sim.measure_queue(agent), norm)
}

/// Mean of all local rewards.
pub fn global_average_reward(locals: &[f64]) -> f64 {
    if locals.is_empty() {
        return 0.0;
    }
    locals.iter().sum::<f64>() / locals.len() as f64
}

/// `(r_i + α Σ_{j ∈ N_i} r_j) / |V_i|`.
pub fn spatial_reward(locals: &[f64], graph: &AgentGraph, agent: AgentId, alpha: f64) -> f64 {
    let neighbors = graph.neighbors(agent);
    let sum: f64 = neighbors.iter().map(|&j| locals[j]).sum();
    (locals[agent] + alpha * sum) / (neighbors.len() + 1) as f64
}

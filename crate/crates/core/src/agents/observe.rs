use alloc::vec::Vec;

use crate::microsim::Sim;
use crate::netmodel::{AgentId, TrafficNetwork};
use crate::neural::STATE_CLIP;

/// Vehicles per lane that map to a normalized wave of 1.
pub const DEFAULT_WAVE_NORM: f64 = 5.0;

/// One agent's network input.
///
/// `own_wave` and `neighbor_waves` are normalized and clipped; neighbor
/// blocks follow the agent graph's ascending neighbor order.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub own_wave: Vec<f64>,
    pub neighbor_waves: Vec<f64>,
    /// Neighbors' previous policies, one block per neighbor (MA2C only).
    pub fingerprints: Vec<f64>,
}

impl Observation {
    /// Own and neighbor waves, the input of the wave branch.
    pub fn waves(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.own_wave.len() + self.neighbor_waves.len());
        v.extend_from_slice(&self.own_wave);
        v.extend_from_slice(&self.neighbor_waves);
        v
    }

    /// Full network input: waves followed by fingerprints.
    pub fn to_input(&self) -> Vec<f64> {
        let mut v = self.waves();
        v.extend_from_slice(&self.fingerprints);
        v
    }

    pub fn len(&self) -> usize {
        self.own_wave.len() + self.neighbor_waves.len() + self.fingerprints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The agent's wave vector divided by `norm` and clipped into `[0, 2]`.
pub fn normalized_wave(sim: &Sim<'_>, agent: AgentId, norm: f64) -> Vec<f64> {
    sim.measure_wave(agent).into_iter().map(|w| (w as f64 / norm).clamp(0.0, STATE_CLIP)).collect()
}

/// Length of the wave block for `agent`: its own incoming lanes plus every
/// neighbor's.
pub fn wave_dim(net: &TrafficNetwork, agent: AgentId) -> usize {
    let own = net.agent_intersection(agent).incoming_lanes.len();
    own + net.agent_graph().neighbors(agent).iter().map(|&j| net.agent_intersection(j).incoming_lanes.len()).sum::<usize>()
}

/// Length of the fingerprint block: the neighbors' phase counts.
pub fn fingerprint_dim(net: &TrafficNetwork, agent: AgentId) -> usize {
    net.agent_graph().neighbors(agent).iter().map(|&j| net.agent_intersection(j).phases.len()).sum()
}

/// Own wave and unscaled neighbor waves; no fingerprints.
pub fn ia2c_observe(sim: &Sim<'_>, agent: AgentId, wave_norm: f64) -> Observation {
    observe(sim, agent, 1.0, wave_norm, None)
}

/// Own wave, neighbor waves scaled by `alpha`, and the neighbors' last
/// policies taken from `last_policies` (indexed by agent).
pub fn ma2c_observe(
    sim: &Sim<'_>,
    agent: AgentId,
    alpha: f64,
    wave_norm: f64,
    last_policies: &[Vec<f64>],
) -> Observation {
    observe(sim, agent, alpha, wave_norm, Some(last_policies))
}

fn observe(
    sim: &Sim<'_>,
    agent: AgentId,
    alpha: f64,
    wave_norm: f64,
    last_policies: Option<&[Vec<f64>]>,
) -> Observation {
    let neighbors = sim.network().agent_graph().neighbors(agent);
    let own_wave = normalized_wave(sim, agent, wave_norm);
    let mut neighbor_waves = Vec::new();
    let mut fingerprints = Vec::new();
    for &j in neighbors {
        neighbor_waves.extend(normalized_wave(sim, j, wave_norm).into_iter().map(|w| alpha * w));
        if let Some(p) = last_policies {
            fingerprints.extend(p[j].iter().map(|v| v.clamp(0.0, 1.0)));
        }
    }
    Observation { own_wave, neighbor_waves, fingerprints }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::uniform_policy;
    use crate::microsim::InsertionSchedule;
    use crate::netmodel::build_grid;

    #[test]
    fn shapes_follow_neighborhoods() {
        let net = build_grid(1, 1, 200.0, 2, 0).unwrap();
        let sim = Sim::new(&net, InsertionSchedule::empty(), 2);
        assert_eq!(ia2c_observe(&sim, 0, 5.0).len(), 4);

        let net = build_grid(2, 2, 200.0, 2, 0).unwrap();
        let sim = Sim::new(&net, InsertionSchedule::empty(), 2);
        let o = ia2c_observe(&sim, 0, 5.0);
        assert_eq!(o.own_wave.len(), 4);
        assert_eq!(o.neighbor_waves.len(), 8);
        assert!(o.fingerprints.is_empty());
        assert_eq!(wave_dim(&net, 0), 12);
        assert_eq!(fingerprint_dim(&net, 0), 4);
    }

    #[test]
    fn single_agent_has_no_fingerprints() {
        let net = build_grid(1, 1, 200.0, 2, 0).unwrap();
        let sim = Sim::new(&net, InsertionSchedule::empty(), 2);
        let o = ma2c_observe(&sim, 0, 0.9, 5.0, &[uniform_policy(2)]);
        assert!(o.fingerprints.is_empty());
        assert_eq!(o, ia2c_observe(&sim, 0, 5.0));
    }

    #[test]
    fn alpha_scales_neighbor_block() {
        let net = build_grid(1, 2, 200.0, 2, 0).unwrap();
        let mut sim = Sim::new(&net, InsertionSchedule::empty(), 2);
        // Ten queued vehicles on one of agent 1's incoming lanes: wave 7 after
        // the detector cap, 7/5 normalized; then a saturated lane of 2.0.
        let lane = net.agent_intersection(1).incoming_lanes[0];
        let exit = *net.reachable_exits(lane).first().unwrap();
        let route = net.route(lane, exit).unwrap();
        for _ in 0..10 {
            sim.place_queued_vehicle(route.clone()).unwrap();
        }
        let policies = [uniform_policy(2), uniform_policy(2)];
        let o = ma2c_observe(&sim, 0, 0.9, 3.5, &policies);
        assert_eq!(o.neighbor_waves[0], 0.9 * 2.0);
        assert_eq!(o.fingerprints, vec![0.5, 0.5]);
        let zero = ma2c_observe(&sim, 0, 0.0, 3.5, &policies);
        assert!(zero.neighbor_waves.iter().all(|&w| w == 0.0));
        let plain = ia2c_observe(&sim, 0, 3.5);
        assert_eq!(plain.neighbor_waves[0], 2.0);
    }
}

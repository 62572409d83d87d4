use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::math::argmax;
use crate::microsim::Sim;
use crate::netmodel::{AgentId, Intersection};
use crate::neural::{LstmCarry, RecurrentNet};
use crate::Result;

/// Outcome of one actor step.
#[derive(Clone, Debug, PartialEq)]
pub struct Action {
    pub action: usize,
    pub log_prob: f64,
    pub carry: LstmCarry,
    /// The full policy; becomes the agent's fingerprint next step.
    pub policy: Vec<f64>,
}

pub fn uniform_policy(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Categorical draw from `probs`. Zero-probability entries are never drawn.
pub fn sample_action<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let total: f64 = probs.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last_positive = k;
        if target < acc {
            return k;
        }
    }
    last_positive
}

/// Runs the actor one step from `carry` and samples an action.
pub fn act<R: Rng + ?Sized>(actor: &RecurrentNet, input: &[f64], carry: &LstmCarry, rng: &mut R) -> Result<Action> {
    let (policy, carry) = actor.step(input, carry)?;
    let action = sample_action(&policy, rng);
    let log_prob = libm::log(policy[action]);
    Ok(Action { action, log_prob, carry, policy })
}

/// The phase whose served lanes carry the largest total wave; ties go to
/// the lowest phase id. Scores within a relative 1e-9 count as tied, so the
/// choice does not change when all waves are scaled by a positive constant.
pub fn greedy_phase(intersection: &Intersection, wave: &[f64]) -> usize {
    let scores: Vec<f64> = intersection
        .phases
        .iter()
        .map(|p| {
            intersection.incoming_lanes.iter().zip(wave).filter(|(&l, _)| p.serves(l)).map(|(_, &w)| w).sum()
        })
        .collect();
    let top = scores[argmax(&scores)];
    scores.iter().position(|&s| s >= top - 1e-9 * top.abs()).unwrap_or(0)
}

pub fn greedy_action(sim: &Sim<'_>, agent: AgentId) -> usize {
    let wave: Vec<f64> = sim.measure_wave(agent).into_iter().map(|w| w as f64).collect();
    greedy_phase(sim.network().agent_intersection(agent), &wave)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microsim::InsertionSchedule;
    use crate::netmodel::{build_grid, Phase};
    use crate::rng;

    #[test]
    fn deterministic_policy_always_wins() {
        let mut r = rng::stream(1, 0);
        for _ in 0..200 {
            assert_eq!(sample_action(&[0.0, 1.0, 0.0], &mut r), 1);
        }
    }

    #[test]
    fn seeded_sampling_replays() {
        let draw = |seed| {
            let mut r = rng::stream(seed, 0);
            (0..50).map(|_| sample_action(&uniform_policy(4), &mut r)).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    fn cross() -> Intersection {
        // Lanes 0,1 north-south; 2,3 east-west.
        Intersection {
            id: 0,
            x: 0.0,
            y: 0.0,
            incoming_lanes: vec![0, 1, 2, 3],
            outgoing_lanes: vec![4, 5, 6, 7],
            phases: vec![Phase::new(0, vec![(0, 5), (1, 4)]), Phase::new(1, vec![(2, 7), (3, 6)])],
            signalized: true,
        }
    }

    #[test]
    fn greedy_cases() {
        let i = cross();
        assert_eq!(greedy_phase(&i, &[0.0; 4]), 0);
        assert_eq!(greedy_phase(&i, &[3.0, 2.0, 1.0, 1.0]), 0);
        assert_eq!(greedy_phase(&i, &[1.0, 0.0, 2.0, 0.0]), 1);
        assert_eq!(greedy_phase(&i, &[1.0, 1.0, 1.0, 1.0]), 0);
    }

    #[test]
    fn greedy_on_empty_sim_picks_phase_zero() {
        let net = build_grid(2, 2, 200.0, 4, 0).unwrap();
        let sim = Sim::new(&net, InsertionSchedule::empty(), 2);
        for a in 0..4 {
            assert_eq!(greedy_action(&sim, a), 0);
        }
    }
}

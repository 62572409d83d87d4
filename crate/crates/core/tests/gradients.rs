//! Backpropagation through time against central finite differences.

use atsc_core::agents::{actor_loss, critic_loss};
use atsc_core::neural::{Head, NetShape, Parameters, RecurrentNet};
use atsc_core::rng;
use rand::Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn random_shape<R: Rng>(r: &mut R) -> NetShape {
    let fingerprint_inputs = if r.random_bool(0.5) { r.random_range(1..=3) } else { 0 };
    NetShape {
        wave_inputs: r.random_range(1..=6 - fingerprint_inputs.min(3)),
        fingerprint_inputs,
        fc_wave: r.random_range(1..=8),
        fc_fingerprint: r.random_range(1..=8),
        lstm: r.random_range(1..=8),
        outputs: r.random_range(2..=4),
    }
}

/// Perturbs parameters so ReLU units are not sitting on their kink and the
/// biases are non-trivial.
fn jitter<R: Rng>(net: &mut RecurrentNet, r: &mut R) {
    let mut flat = net.to_flat();
    for v in &mut flat {
        *v += r.random_range(-0.3..0.3);
    }
    net.load_flat(&flat).unwrap();
}

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Returns the number of parameters checked.
fn check(head: Head, seed: u64) -> usize {
    let mut r = rng::stream(seed, 99);
    let shape = random_shape(&mut r);
    let mut net = RecurrentNet::new(shape, head, &mut r);
    jitter(&mut net, &mut r);
    let steps = r.random_range(1..=5);
    let inputs: Vec<Vec<f64>> = (0..steps).map(|_| (0..shape.inputs()).map(|_| r.random_range(0.0..2.0)).collect()).collect();
    let actions: Vec<usize> = (0..steps).map(|_| r.random_range(0..shape.outputs)).collect();
    let targets: Vec<f64> = (0..steps).map(|_| r.random_range(-3.0..1.0)).collect();
    let mut start = net.initial_carry();
    for v in start.h.iter_mut().chain(start.c.iter_mut()) {
        *v = r.random_range(-0.5..0.5);
    }
    let beta = 0.01;

    let loss = |n: &RecurrentNet| -> f64 {
        let tape = n.forward_sequence(&inputs, &start).unwrap();
        let outs: Vec<Vec<f64>> = (0..steps).map(|t| tape.output(t).to_vec()).collect();
        match head {
            Head::Policy => actor_loss(&outs, &actions, &targets, beta).unwrap().loss,
            Head::Value => critic_loss(&targets, &outs.iter().map(|o| o[0]).collect::<Vec<_>>()).unwrap().loss,
        }
    };
    let tape = net.forward_sequence(&inputs, &start).unwrap();
    let outs: Vec<Vec<f64>> = (0..steps).map(|t| tape.output(t).to_vec()).collect();
    let head_grads: Vec<Vec<f64>> = match head {
        Head::Policy => actor_loss(&outs, &actions, &targets, beta).unwrap().logit_grads,
        Head::Value => critic_loss(&targets, &outs.iter().map(|o| o[0]).collect::<Vec<_>>())
            .unwrap()
            .value_grads
            .into_iter()
            .map(|g| vec![g])
            .collect(),
    };
    let analytic = net.backward(&tape, &head_grads).unwrap().to_flat();
    let base = net.to_flat();
    let mut probe = net.clone();
    for i in 0..base.len() {
        let mut v = base.clone();
        v[i] = base[i] + H;
        probe.load_flat(&v).unwrap();
        let up = loss(&probe);
        v[i] = base[i] - H;
        probe.load_flat(&v).unwrap();
        let down = loss(&probe);
        let fd = (up - down) / (2.0 * H);
        let err = relative_error(fd, analytic[i]);
        assert!(err < TOL, "seed {seed} {head:?} param {i}/{}: fd {fd:e} vs bptt {:e} (rel {err:e})", base.len(), analytic[i]);
    }
    base.len()
}

#[test]
fn actor_gradients_match_finite_differences() {
    let n: usize = (0..25).map(|s| check(Head::Policy, s)).sum();
    assert!(n > 0);
}

#[test]
fn critic_gradients_match_finite_differences() {
    let n: usize = (0..25).map(|s| check(Head::Value, 1000 + s)).sum();
    assert!(n > 0);
}

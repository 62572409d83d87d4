use atsc_core::agents::{
    greedy_phase, ma2c_observe, n_step_returns, spatial_reward, uniform_policy, Observation,
};
use atsc_core::math::{argmax, softmax};
use atsc_core::microsim::{make_schedule, InsertionEvent, InsertionSchedule, Scenario, Sim};
use atsc_core::netmodel::{build_grid, AgentGraph, Lane, NetworkSpec, TrafficNetwork};
use atsc_core::neural::{cap_gradients, clip_reward, clip_states, orthogonal_init, Parameters};
use atsc_core::rng;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

#[derive(Clone, Debug, PartialEq)]
struct Flat(Vec<f64>);

impl Parameters for Flat {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        f(&self.0)
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        f(&mut self.0)
    }
}

fn bfs_all(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<Option<usize>>> {
    let mut adj = vec![vec![]; n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    (0..n)
        .map(|s| {
            let mut d = vec![None; n];
            d[s] = Some(0);
            let mut q = std::collections::VecDeque::from([s]);
            while let Some(u) = q.pop_front() {
                for &v in &adj[u] {
                    if d[v].is_none() {
                        d[v] = Some(d[u].unwrap() + 1);
                        q.push_back(v);
                    }
                }
            }
            d
        })
        .collect()
}

fn graph_strategy() -> impl Strategy<Value = (usize, Vec<(usize, usize)>, usize)> {
    (1usize..=25).prop_flat_map(|n| {
        let edges = proptest::collection::vec((0..n, 0..n), 0..60)
            .prop_map(|e| e.into_iter().filter(|(a, b)| a != b).collect::<Vec<_>>());
        (Just(n), edges, 1usize..=3)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hop_distance_is_a_metric((n, edges, k) in graph_strategy()) {
        let g = AgentGraph::new(n, &edges, k).unwrap();
        let oracle = bfs_all(n, &edges);
        for i in 0..n {
            for j in 0..n {
                let d = g.hop_distance(i, j).unwrap();
                prop_assert_eq!(d, oracle[i][j]);
                prop_assert_eq!(d, g.hop_distance(j, i).unwrap());
                for m in 0..n {
                    if let (Some(a), Some(b), Some(c)) = (d, oracle[i][m], oracle[m][j]) {
                        prop_assert!(a <= b + c);
                    }
                }
            }
        }
    }

    #[test]
    fn neighborhoods_are_symmetric((n, edges, k) in graph_strategy()) {
        let g = AgentGraph::new(n, &edges, k).unwrap();
        for i in 0..n {
            let region = g.local_region(i).unwrap();
            prop_assert!(region.contains(&i));
            for &j in g.neighbors(i) {
                prop_assert!(g.neighbors(j).contains(&i));
                prop_assert!(region.contains(&j));
            }
        }
    }

    #[test]
    fn spatial_reward_is_monotone(
        (n, edges, _) in graph_strategy(),
        seed in any::<u64>(),
        alpha in 0.0f64..=1.0,
        bump in 0.0f64..3.0,
    ) {
        let g = AgentGraph::new(n, &edges, 1).unwrap();
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let locals: Vec<f64> = (0..n).map(|_| -r.random::<f64>() * 2.0).collect();
        for i in 0..n {
            for &j in g.neighbors(i) {
                // A neighbor's queue shrinking raises its local reward.
                let mut better = locals.clone();
                better[j] += bump;
                prop_assert!(spatial_reward(&better, &g, i, alpha) >= spatial_reward(&locals, &g, i, alpha));
            }
        }
    }

    #[test]
    fn phase_movements_use_incoming_lanes(rows in 1usize..5, cols in 1usize..5, four in any::<bool>()) {
        let net = build_grid(rows, cols, 150.0, if four { 4 } else { 2 }, 0).unwrap();
        for inter in net.intersections() {
            for p in &inter.phases {
                for &(from, to) in &p.permitted_movements {
                    prop_assert!(inter.incoming_lanes.contains(&from));
                    prop_assert_eq!(net.lane(from).to, inter.id);
                    prop_assert_eq!(net.lane(to).from, inter.id);
                }
            }
        }
    }

    #[test]
    fn softmax_is_a_distribution(logits in proptest::collection::vec(-50.0f64..50.0, 1..12), shift in -100.0f64..100.0) {
        let p = softmax(&logits);
        prop_assert!(p.iter().all(|&v| v > 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
        prop_assert_eq!(argmax(&softmax(&shifted)), argmax(&p));
    }

    #[test]
    fn clipping_is_idempotent(
        xs in proptest::collection::vec(-10.0f64..10.0, 0..20),
        r in -100.0f64..100.0,
        cap in 0.1f64..50.0,
    ) {
        let once = clip_states(&xs);
        prop_assert_eq!(clip_states(&once), once.clone());
        prop_assert!(once.iter().all(|v| (0.0..=2.0).contains(v)));
        prop_assert_eq!(clip_reward(clip_reward(r)), clip_reward(r));
        let mut g = Flat(xs.clone());
        cap_gradients(&mut g, cap);
        let capped = g.clone();
        prop_assert!(capped.l2_norm() <= cap);
        cap_gradients(&mut g, cap);
        prop_assert_eq!(g, capped);
    }

    #[test]
    fn orthogonal_init_is_orthonormal(rows in 1usize..40, cols in 1usize..40, seed in any::<u64>()) {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = orthogonal_init(rows, cols, 1.0, &mut r);
        let short = rows.min(cols);
        for a in 0..short {
            for b in 0..short {
                let dot: f64 = if rows >= cols {
                    (0..rows).map(|i| m.get(i, a) * m.get(i, b)).sum()
                } else {
                    (0..cols).map(|i| m.get(a, i) * m.get(b, i)).sum()
                };
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn n_step_returns_match_double_loop(
        rewards in proptest::collection::vec(-2.0f64..2.0, 0..60),
        bootstrap in -50.0f64..50.0,
        gamma in prop_oneof![Just(0.0), Just(0.99), Just(1.0), 0.0f64..=1.0],
    ) {
        let got = n_step_returns(&rewards, bootstrap, gamma);
        let n = rewards.len();
        prop_assert_eq!(got.len(), n);
        for t in 0..n {
            let mut want = 0.0;
            for k in t..n {
                want += gamma.powi((k - t) as i32) * rewards[k];
            }
            want += gamma.powi((n - t) as i32) * bootstrap;
            prop_assert!((got[t] - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }

    #[test]
    fn greedy_ignores_wave_scale(seed in any::<u64>(), scale in 0.01f64..100.0, four in any::<bool>()) {
        let net = build_grid(1, 1, 200.0, if four { 4 } else { 2 }, 0).unwrap();
        let inter = net.agent_intersection(0);
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let wave: Vec<f64> = inter.incoming_lanes.iter().map(|_| f64::from(r.random_range(0u32..10))).collect();
        let scaled: Vec<f64> = wave.iter().map(|w| w * scale).collect();
        prop_assert_eq!(greedy_phase(inter, &wave), greedy_phase(inter, &scaled));
    }

    #[test]
    fn fingerprints_sum_to_one_per_neighbor(seed in any::<u64>(), ticks in 0u32..200) {
        let net = build_grid(3, 3, 200.0, 2, 0).unwrap();
        let schedule = make_schedule(&net, Scenario::new(200, 100), 400, seed).unwrap();
        let mut sim = Sim::new(&net, schedule, 2);
        for _ in 0..ticks {
            sim.tick();
        }
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let policies: Vec<Vec<f64>> = (0..net.agent_count())
            .map(|i| {
                let k = net.agent_intersection(i).phases.len();
                if r.random::<bool>() {
                    uniform_policy(k)
                } else {
                    softmax(&(0..k).map(|_| r.random::<f64>() * 10.0 - 5.0).collect::<Vec<_>>())
                }
            })
            .collect();
        for i in 0..net.agent_count() {
            let obs: Observation = ma2c_observe(&sim, i, 0.9, 5.0, &policies);
            let mut offset = 0;
            for &j in net.agent_graph().neighbors(i) {
                let k = net.agent_intersection(j).phases.len();
                let s: f64 = obs.fingerprints[offset..offset + k].iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
                offset += k;
            }
            prop_assert_eq!(offset, obs.fingerprints.len());
        }
    }
}

/// Random phase requests on a loaded 3x3 grid.
fn random_run(seed: u64, ticks: u32, mut check: impl FnMut(&Sim<'_>)) -> Vec<u64> {
    let net = build_grid(3, 3, 150.0, 2, 0).unwrap();
    let schedule = make_schedule(&net, Scenario::new(600, 300), ticks.max(300), seed).unwrap();
    let mut sim = Sim::new(&net, schedule, 2);
    let mut r = rng::stream(seed, 99);
    let mut trace = Vec::new();
    for t in 0..ticks {
        if t % 5 == 0 {
            for a in 0..net.agent_count() {
                let k = net.agent_intersection(a).phases.len();
                sim.apply_action(a, r.random_range(0..k)).unwrap();
            }
        }
        sim.tick();
        check(&sim);
        trace.push(sim.state_digest());
    }
    trace
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn vehicles_are_conserved(seed in any::<u64>()) {
        random_run(seed, 500, |sim| {
            assert_eq!(sim.inserted(), sim.running_vehicles() + sim.arrived());
            assert_eq!(sim.running_vehicles(), sim.count_on_lanes());
        });
    }

    #[test]
    fn measurements_stay_within_lane_bounds(seed in any::<u64>()) {
        random_run(seed, 400, |sim| {
            let net = sim.network();
            for a in 0..net.agent_count() {
                let inter = net.agent_intersection(a);
                let capacity: usize = inter.incoming_lanes.iter().map(|&l| net.lane(l).capacity()).sum();
                assert!(sim.measure_queue(a) <= capacity);
                for (w, &l) in sim.measure_wave(a).iter().zip(&inter.incoming_lanes) {
                    assert!(*w <= sim.lane_occupancy(l));
                }
            }
        });
    }

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>()) {
        prop_assert_eq!(random_run(seed, 300, |_| {}), random_run(seed, 300, |_| {}));
    }
}

/// One-way corridor: source, `k` signalized single-phase nodes, sink.
fn corridor(k: usize, length: f64, speed: f64) -> TrafficNetwork {
    let mut spec = NetworkSpec { neighbor_threshold: 1, ..Default::default() };
    for i in 0..k + 2 {
        spec.nodes.push((i as f64 * length, 0.0, i > 0 && i <= k));
    }
    for i in 0..=k {
        spec.lanes.push(Lane::new(i, i, i + 1, length, speed));
    }
    for node in 1..=k {
        // Both phases give the through movement green.
        spec.phases.push((node, vec![(node - 1, node)]));
        spec.phases.push((node, vec![(node - 1, node)]));
    }
    TrafficNetwork::from_spec(spec).unwrap()
}

#[test]
fn green_corridor_delivers_every_vehicle_in_bounded_time() {
    for k in 1..=4 {
        let net = corridor(k, 200.0, 10.0);
        let lane = net.lane(0);
        let route_len = (k + 1) as f64 * lane.length;
        let lanes = (k + 1) as f64;
        let bound = route_len / lane.free_flow_speed + lanes / lane.saturation_rate + 2.0 * lanes;
        // Headways of one discharge interval never build a queue.
        let headway = (1.0 / lane.saturation_rate) as u32;
        let events: Vec<InsertionEvent> = (0..40)
            .map(|v| InsertionEvent { time: v * headway, origin: 0, destination: k })
            .collect();
        let mut sim = Sim::new(&net, InsertionSchedule::from_events(Scenario::new(40, 40 * headway), events), 2);
        let mut entered = vec![None; 40];
        let mut done = vec![None; 40];
        for _ in 0..1000 {
            sim.tick();
            for id in 0..sim.inserted() as usize {
                match sim.vehicle(id) {
                    Some(v) => entered[id] = entered[id].or(Some(v.entered_at)),
                    None => done[id] = done[id].or(Some(sim.clock())),
                }
            }
        }
        assert_eq!(sim.arrived(), 40, "corridor of {k}");
        for id in 0..40 {
            let took = f64::from(done[id].unwrap() - entered[id].unwrap());
            assert!(took <= bound, "vehicle {id} took {took} s, bound {bound}");
        }
    }
}

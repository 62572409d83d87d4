//! Line-oriented network description.
//!
//! ```text
//! node  <id> <x> <y> <signalized>
//! lane  <id> <from> <to> <length> <speed> [saturation=<veh/s>] [sensor=<m>]
//! phase <node> <id> <movement>...
//! edge  <node> <node>
//! neighbors <hops>
//! ```
//!
//! A movement is `in>out` for one turn, or a bare incoming lane id for all
//! of that lane's turns except the U-turn. Ids are dense and start at 0;
//! phases are numbered per node in order. Without `edge` lines the agent
//! graph joins signalized nodes connected by a road. `#` starts a comment.

use std::fmt::Write as _;

use atsc_core::netmodel::{Lane, NetworkSpec, NodeId, TrafficNetwork, DEFAULT_SATURATION_RATE, DEFAULT_SENSOR_RANGE};

use crate::error::{AtscError, Result};

enum Movement {
    One(usize, usize),
    AllFrom(usize),
}

/// Parses and validates a network description. `origin` names the source
/// in error messages.
pub fn parse(text: &str, origin: &str) -> Result<TrafficNetwork> {
    TrafficNetwork::from_spec(parse_spec(text, origin)?).map_err(AtscError::from)
}

pub fn parse_spec(text: &str, origin: &str) -> Result<NetworkSpec> {
    let mut spec = NetworkSpec { neighbor_threshold: 1, ..NetworkSpec::default() };
    let mut phases: Vec<(usize, NodeId, Vec<Movement>)> = Vec::new();
    let mut per_node_phases: Vec<usize> = Vec::new();
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: String| AtscError::Parse { path: origin.to_string(), line: line_no, message };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut words = line.split_whitespace();
        let keyword = words.next().unwrap_or_default();
        let args: Vec<&str> = words.collect();
        let num = |s: &str, what: &str| s.parse::<f64>().map_err(|_| err(format!("{what} '{s}' is not a number")));
        let id = |s: &str, what: &str| s.parse::<usize>().map_err(|_| err(format!("{what} '{s}' is not an id")));
        match keyword {
            "node" => {
                if args.len() != 4 {
                    return Err(err("expected: node <id> <x> <y> <signalized>".into()));
                }
                let n = id(args[0], "node id")?;
                if n != spec.nodes.len() {
                    return Err(err(format!("node ids must be consecutive from 0; expected {}", spec.nodes.len())));
                }
                let signalized = match args[3] {
                    "1" | "true" | "yes" => true,
                    "0" | "false" | "no" => false,
                    other => return Err(err(format!("signalized flag '{other}' must be 0/1, true/false or yes/no"))),
                };
                spec.nodes.push((num(args[1], "x")?, num(args[2], "y")?, signalized));
                per_node_phases.push(0);
            }
            "lane" => {
                if args.len() < 5 {
                    return Err(err("expected: lane <id> <from> <to> <length> <speed> [saturation=..] [sensor=..]".into()));
                }
                let l = id(args[0], "lane id")?;
                if l != spec.lanes.len() {
                    return Err(err(format!("lane ids must be consecutive from 0; expected {}", spec.lanes.len())));
                }
                let mut lane =
                    Lane::new(l, id(args[1], "from node")?, id(args[2], "to node")?, num(args[3], "length")?, num(args[4], "speed")?);
                for opt in &args[5..] {
                    match opt.split_once('=') {
                        Some(("saturation", v)) => lane.saturation_rate = num(v, "saturation")?,
                        Some(("sensor", v)) => lane.sensor_range = num(v, "sensor")?,
                        _ => return Err(err(format!("unknown lane option '{opt}'"))),
                    }
                }
                spec.lanes.push(lane);
            }
            "phase" => {
                if args.len() < 3 {
                    return Err(err("expected: phase <node> <id> <movement>...".into()));
                }
                let node = id(args[0], "node")?;
                let p = id(args[1], "phase id")?;
                let Some(count) = per_node_phases.get_mut(node) else {
                    return Err(err(format!("phase refers to node {node} before it is declared")));
                };
                if p != *count {
                    return Err(err(format!("phases of node {node} must be numbered in order; expected {count}")));
                }
                *count += 1;
                let mut moves = Vec::new();
                for m in &args[2..] {
                    moves.push(match m.split_once('>') {
                        Some((a, b)) => Movement::One(id(a, "lane")?, id(b, "lane")?),
                        None => Movement::AllFrom(id(m, "lane")?),
                    });
                }
                phases.push((line_no, node, moves));
            }
            "edge" => {
                if args.len() != 2 {
                    return Err(err("expected: edge <node> <node>".into()));
                }
                edges.push((id(args[0], "node")?, id(args[1], "node")?));
            }
            "neighbors" => {
                if args.len() != 1 {
                    return Err(err("expected: neighbors <hops>".into()));
                }
                spec.neighbor_threshold = id(args[0], "hop count")?;
                if spec.neighbor_threshold == 0 {
                    return Err(err("neighbor hop count must be at least 1".into()));
                }
            }
            other => return Err(err(format!("unknown keyword '{other}'"))),
        }
    }

    for (line, node, moves) in phases {
        let err = |message: String| AtscError::Parse { path: origin.to_string(), line, message };
        let mut pairs = Vec::new();
        for m in moves {
            match m {
                Movement::One(a, b) => {
                    if a >= spec.lanes.len() || b >= spec.lanes.len() {
                        return Err(err(format!("movement {a}>{b} names an unknown lane")));
                    }
                    pairs.push((a, b));
                }
                Movement::AllFrom(a) => {
                    let Some(lane) = spec.lanes.get(a) else {
                        return Err(err(format!("unknown lane {a}")));
                    };
                    if lane.to != node {
                        return Err(err(format!("lane {a} does not end at node {node}")));
                    }
                    let before = pairs.len();
                    pairs.extend(spec.lanes.iter().filter(|b| b.from == node && b.to != lane.from).map(|b| (a, b.id)));
                    if pairs.len() == before {
                        return Err(err(format!("lane {a} has no onward movement at node {node}")));
                    }
                }
            }
        }
        spec.phases.push((node, pairs));
    }
    if !edges.is_empty() {
        spec.agent_edges = Some(edges);
    }
    Ok(spec)
}

/// Serializes a network so that [`parse`] rebuilds an equal one. Phases are
/// written as explicit movements and agent edges are always listed.
pub fn write(net: &TrafficNetwork) -> String {
    let mut out = String::new();
    let nodes = net.intersections();
    for n in nodes {
        let _ = writeln!(out, "node {} {} {} {}", n.id, n.x + 0.0, n.y + 0.0, u8::from(n.signalized));
    }
    for l in net.lanes() {
        let _ = write!(out, "lane {} {} {} {} {}", l.id, l.from, l.to, l.length, l.free_flow_speed);
        if l.saturation_rate != DEFAULT_SATURATION_RATE {
            let _ = write!(out, " saturation={}", l.saturation_rate);
        }
        if l.sensor_range != DEFAULT_SENSOR_RANGE.min(l.length) {
            let _ = write!(out, " sensor={}", l.sensor_range);
        }
        out.push('\n');
    }
    for n in nodes {
        for p in &n.phases {
            let _ = write!(out, "phase {} {}", n.id, p.id);
            for (a, b) in &p.permitted_movements {
                let _ = write!(out, " {a}>{b}");
            }
            out.push('\n');
        }
    }
    let graph = net.agent_graph();
    for (a, b) in graph.edges() {
        let _ = writeln!(out, "edge {} {}", net.agent_node(a), net.agent_node(b));
    }
    let _ = writeln!(out, "neighbors {}", graph.neighbor_threshold());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use atsc_core::netmodel::build_grid;

    const TEE: &str = "\
# one signal, three arms
node 0 0 0 1
node 1 -200 0 0
node 2 200 0 0
node 3 0 -200 0
lane 0 1 0 200 13.9
lane 1 0 1 200 13.9
lane 2 2 0 200 13.9
lane 3 0 2 200 13.9
lane 4 3 0 200 13.9 saturation=0.4
lane 5 0 3 200 13.9
phase 0 0 0 2
phase 0 1 4>1 4>3
";

    #[test]
    fn parses_hand_written_network() {
        let net = parse(TEE, "tee").unwrap();
        assert_eq!(net.agent_count(), 1);
        assert_eq!(net.entry_lanes(), &[0, 2, 4]);
        assert_eq!(net.exit_lanes(), &[1, 3, 5]);
        let p0 = &net.intersection(0).phases[0];
        assert_eq!(p0.permitted_movements, vec![(0, 3), (0, 5), (2, 1), (2, 5)]);
        assert_eq!(net.lane(4).saturation_rate, 0.4);
    }

    #[test]
    fn grid_round_trips() {
        for (r, c, p) in [(1, 1, 2), (2, 3, 2), (3, 3, 4)] {
            let net = build_grid(r, c, 200.0, p, 0).unwrap();
            let text = write(&net);
            let back = parse(&text, "grid").unwrap();
            assert_eq!(back, net);
            assert_eq!(write(&back), text);
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "node 0 0 0 1\nlane 0 0 9 x 13.9\n";
        match parse(bad, "f.net") {
            Err(AtscError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("road 1 2", "f"), Err(AtscError::Parse { line: 1, .. })));
        assert!(matches!(parse("node 1 0 0 1", "f"), Err(AtscError::Parse { .. })));
        // Structurally parsed but invalid: signalized node with one phase.
        let one_phase = TEE.replace("phase 0 1 4>1 4>3\n", "");
        assert!(matches!(parse(&one_phase, "f"), Err(AtscError::Core(_))));
    }
}

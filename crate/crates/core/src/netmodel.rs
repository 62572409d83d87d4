//! Road network and agent graph.
//!
//! A [`TrafficNetwork`] is a directed lane graph over intersections. The
//! signalized intersections are the learning agents; they are numbered
//! densely (`AgentId`) in ascending node order and linked in an
//! [`AgentGraph`] whenever a road connects them without crossing another
//! signalized intersection.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::{Error, Result};

pub type NodeId = usize;
pub type LaneId = usize;
pub type AgentId = usize;

/// Length of road one stopped vehicle occupies.
pub const VEHICLE_SPACING: f64 = 7.5;
pub const DEFAULT_SENSOR_RANGE: f64 = 50.0;
pub const DEFAULT_SATURATION_RATE: f64 = 0.5;
/// 50 km/h.
pub const DEFAULT_FREE_FLOW_SPEED: f64 = 13.9;

#[derive(Clone, Debug, PartialEq)]
pub struct Lane {
    pub id: LaneId,
    pub from: NodeId,
    pub to: NodeId,
    /// Meters.
    pub length: f64,
    /// Meters per second.
    pub free_flow_speed: f64,
    /// Vehicles per second discharged from the stop line during green.
    pub saturation_rate: f64,
    /// Meters before the stop line covered by the wave detector.
    pub sensor_range: f64,
}

impl Lane {
    pub fn new(id: LaneId, from: NodeId, to: NodeId, length: f64, free_flow_speed: f64) -> Self {
        Self {
            id,
            from,
            to,
            length,
            free_flow_speed,
            saturation_rate: DEFAULT_SATURATION_RATE,
            sensor_range: DEFAULT_SENSOR_RANGE.min(length),
        }
    }

    /// Number of vehicles the lane holds bumper to bumper (at least one).
    pub fn capacity(&self) -> usize {
        ((self.length / VEHICLE_SPACING) as usize).max(1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Phase {
    pub id: usize,
    /// Sorted `(incoming lane, outgoing lane)` pairs given green.
    pub permitted_movements: Vec<(LaneId, LaneId)>,
}

impl Phase {
    pub fn new(id: usize, mut movements: Vec<(LaneId, LaneId)>) -> Self {
        movements.sort_unstable();
        movements.dedup();
        Self { id, permitted_movements: movements }
    }

    pub fn permits(&self, from: LaneId, to: LaneId) -> bool {
        self.permitted_movements.binary_search(&(from, to)).is_ok()
    }

    /// Whether any movement out of `lane` is green in this phase.
    pub fn serves(&self, lane: LaneId) -> bool {
        let i = self.permitted_movements.partition_point(|&(a, _)| a < lane);
        self.permitted_movements.get(i).is_some_and(|&(a, _)| a == lane)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Intersection {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    /// Fixed order; sensor vectors follow it.
    pub incoming_lanes: Vec<LaneId>,
    pub outgoing_lanes: Vec<LaneId>,
    pub phases: Vec<Phase>,
    pub signalized: bool,
}

/// Undirected graph over agents with a hop-count neighborhood.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentGraph {
    adjacency: Vec<Vec<AgentId>>,
    neighbor_threshold: usize,
    neighbors: Vec<Vec<AgentId>>,
}

impl AgentGraph {
    pub fn new(vertex_count: usize, edges: &[(AgentId, AgentId)], neighbor_threshold: usize) -> Result<Self> {
        if neighbor_threshold == 0 {
            return Err(invalid!("neighbor threshold must be at least one hop"));
        }
        let mut adjacency = vec![Vec::new(); vertex_count];
        for &(a, b) in edges {
            if a >= vertex_count || b >= vertex_count {
                return Err(invalid!("edge ({a}, {b}) references a missing agent"));
            }
            if a == b {
                return Err(invalid!("self-loop on agent {a}"));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
            adj.dedup();
        }
        let mut graph = Self { adjacency, neighbor_threshold, neighbors: Vec::new() };
        graph.neighbors = (0..vertex_count)
            .map(|i| {
                let dist = graph.bfs(i);
                (0..vertex_count)
                    .filter(|&j| j != i && dist[j].is_some_and(|d| d <= neighbor_threshold))
                    .collect()
            })
            .collect();
        Ok(graph)
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbor_threshold(&self) -> usize {
        self.neighbor_threshold
    }

    /// Unordered edges with `a < b`, ascending.
    pub fn edges(&self) -> Vec<(AgentId, AgentId)> {
        let mut out = Vec::new();
        for (a, adj) in self.adjacency.iter().enumerate() {
            out.extend(adj.iter().filter(|&&b| a < b).map(|&b| (a, b)));
        }
        out
    }

    /// Agents within the hop threshold, ascending, excluding `i`.
    pub fn neighbors(&self, i: AgentId) -> &[AgentId] {
        &self.neighbors[i]
    }

    fn bfs(&self, from: AgentId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.adjacency.len()];
        dist[from] = Some(0);
        let mut queue = VecDeque::from([from]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap_or(0);
            for &w in &self.adjacency[v] {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Shortest hop count, or `None` when the pair is disconnected.
    pub fn hop_distance(&self, i: AgentId, j: AgentId) -> Result<Option<usize>> {
        let n = self.vertex_count();
        if i >= n || j >= n {
            return Err(invalid!("unknown agent in pair ({i}, {j})"));
        }
        Ok(self.bfs(i)[j])
    }

    /// The agent together with its neighbors, ascending.
    pub fn local_region(&self, i: AgentId) -> Result<Vec<AgentId>> {
        if i >= self.vertex_count() {
            return Err(invalid!("unknown agent {i}"));
        }
        let mut region = self.neighbors[i].clone();
        let pos = region.partition_point(|&j| j < i);
        region.insert(pos, i);
        Ok(region)
    }
}

/// Road network with its agent graph. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct TrafficNetwork {
    intersections: Vec<Intersection>,
    lanes: Vec<Lane>,
    agents: Vec<NodeId>,
    agent_of_node: Vec<Option<AgentId>>,
    agent_graph: AgentGraph,
    entry_lanes: Vec<LaneId>,
    exit_lanes: Vec<LaneId>,
}

/// Raw description a [`TrafficNetwork`] is validated from.
#[derive(Clone, Debug, Default)]
pub struct NetworkSpec {
    /// `(x, y, signalized)` per node, indexed by node id.
    pub nodes: Vec<(f64, f64, bool)>,
    /// Lanes indexed by lane id.
    pub lanes: Vec<Lane>,
    /// `(node, movements)`; phase ids are assigned in order per node.
    pub phases: Vec<(NodeId, Vec<(LaneId, LaneId)>)>,
    /// Explicit agent edges as node pairs; derived from the roads when `None`.
    pub agent_edges: Option<Vec<(NodeId, NodeId)>>,
    pub neighbor_threshold: usize,
}

impl TrafficNetwork {
    pub fn from_spec(spec: NetworkSpec) -> Result<Self> {
        let n_nodes = spec.nodes.len();
        let bad = |msg: String| Err(Error::InvalidNetwork(msg));
        for (i, lane) in spec.lanes.iter().enumerate() {
            if lane.id != i {
                return bad(alloc::format!("lane ids must be dense; found {} at index {i}", lane.id));
            }
            if lane.from >= n_nodes || lane.to >= n_nodes || lane.from == lane.to {
                return bad(alloc::format!("lane {i} has invalid endpoints"));
            }
            if !(lane.length > 0.0) || !(lane.free_flow_speed > 0.0) || !(lane.saturation_rate > 0.0) {
                return bad(alloc::format!("lane {i} needs positive length, speed and saturation rate"));
            }
            if !(lane.sensor_range >= 0.0 && lane.sensor_range <= lane.length) {
                return bad(alloc::format!("lane {i} sensor range exceeds its length"));
            }
        }

        let mut intersections: Vec<Intersection> = spec
            .nodes
            .iter()
            .enumerate()
            .map(|(id, &(x, y, signalized))| Intersection {
                id,
                x,
                y,
                incoming_lanes: Vec::new(),
                outgoing_lanes: Vec::new(),
                phases: Vec::new(),
                signalized,
            })
            .collect();
        for lane in &spec.lanes {
            intersections[lane.to].incoming_lanes.push(lane.id);
            intersections[lane.from].outgoing_lanes.push(lane.id);
        }
        for (node, movements) in spec.phases {
            if node >= n_nodes {
                return bad(alloc::format!("phase on unknown node {node}"));
            }
            let inter = &mut intersections[node];
            if movements.is_empty() {
                return bad(alloc::format!("empty phase on node {node}"));
            }
            for &(a, b) in &movements {
                if !inter.incoming_lanes.contains(&a) || !inter.outgoing_lanes.contains(&b) {
                    return bad(alloc::format!("phase on node {node} references non-incident movement ({a}, {b})"));
                }
            }
            let id = inter.phases.len();
            inter.phases.push(Phase::new(id, movements));
        }
        for inter in &intersections {
            if !inter.signalized {
                continue;
            }
            if inter.phases.len() < 2 {
                return bad(alloc::format!("signalized node {} needs at least two phases", inter.id));
            }
            for &lane in &inter.incoming_lanes {
                if !inter.phases.iter().any(|p| p.serves(lane)) {
                    return bad(alloc::format!("incoming lane {lane} of node {} is never green", inter.id));
                }
            }
        }

        let agents: Vec<NodeId> = intersections.iter().filter(|i| i.signalized).map(|i| i.id).collect();
        let mut agent_of_node = vec![None; n_nodes];
        for (a, &node) in agents.iter().enumerate() {
            agent_of_node[node] = Some(a);
        }

        let entry_lanes: Vec<LaneId> = spec
            .lanes
            .iter()
            .filter(|l| {
                let node = &intersections[l.from];
                !node.signalized && node.incoming_lanes.iter().all(|&k| spec.lanes[k].from == l.to)
            })
            .map(|l| l.id)
            .collect();
        let exit_lanes: Vec<LaneId> = spec
            .lanes
            .iter()
            .filter(|l| {
                let node = &intersections[l.to];
                !node.signalized && node.outgoing_lanes.iter().all(|&k| spec.lanes[k].to == l.from)
            })
            .map(|l| l.id)
            .collect();
        if entry_lanes.is_empty() || exit_lanes.is_empty() {
            return bad("network needs at least one entry and one exit lane".into());
        }

        let edges = match spec.agent_edges {
            Some(pairs) => {
                let mut edges = Vec::with_capacity(pairs.len());
                for (a, b) in pairs {
                    match (agent_of_node.get(a).copied().flatten(), agent_of_node.get(b).copied().flatten()) {
                        (Some(x), Some(y)) => edges.push((x, y)),
                        _ => return bad(alloc::format!("agent edge ({a}, {b}) joins non-signalized nodes")),
                    }
                }
                edges
            }
            None => road_adjacent_agents(&intersections, &spec.lanes, &agent_of_node),
        };
        let agent_graph = AgentGraph::new(agents.len(), &edges, spec.neighbor_threshold.max(1))?;

        let net = Self { intersections, lanes: spec.lanes, agents, agent_of_node, agent_graph, entry_lanes, exit_lanes };
        for &entry in &net.entry_lanes {
            if net.reachable_exits(entry).is_empty() {
                return bad(alloc::format!("entry lane {entry} reaches no exit lane"));
            }
        }
        Ok(net)
    }

    pub fn intersections(&self) -> &[Intersection] {
        &self.intersections
    }

    pub fn intersection(&self, node: NodeId) -> &Intersection {
        &self.intersections[node]
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    pub fn lane(&self, id: LaneId) -> &Lane {
        &self.lanes[id]
    }

    pub fn agent_graph(&self) -> &AgentGraph {
        &self.agent_graph
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    /// Node controlled by `agent`.
    pub fn agent_node(&self, agent: AgentId) -> NodeId {
        self.agents[agent]
    }

    pub fn agent_intersection(&self, agent: AgentId) -> &Intersection {
        &self.intersections[self.agents[agent]]
    }

    pub fn agent_of_node(&self, node: NodeId) -> Option<AgentId> {
        self.agent_of_node[node]
    }

    pub fn entry_lanes(&self) -> &[LaneId] {
        &self.entry_lanes
    }

    pub fn exit_lanes(&self) -> &[LaneId] {
        &self.exit_lanes
    }

    pub fn is_exit(&self, lane: LaneId) -> bool {
        self.exit_lanes.binary_search(&lane).is_ok()
    }

    /// Whether a vehicle may ever turn from `from` into `to`: some phase
    /// permits it at a signalized node; any non-U-turn at an unsignalized one.
    pub fn movement_allowed(&self, from: LaneId, to: LaneId) -> bool {
        let a = &self.lanes[from];
        let b = &self.lanes[to];
        if a.to != b.from {
            return false;
        }
        let node = &self.intersections[a.to];
        if node.signalized {
            node.phases.iter().any(|p| p.permits(from, to))
        } else {
            b.to != a.from
        }
    }

    /// Lanes reachable in one movement from `lane`, ascending by id.
    pub fn successors(&self, lane: LaneId) -> Vec<LaneId> {
        let node = &self.intersections[self.lanes[lane].to];
        let mut out: Vec<LaneId> =
            node.outgoing_lanes.iter().copied().filter(|&b| self.movement_allowed(lane, b)).collect();
        out.sort_unstable();
        out
    }

    /// Shortest-hop lane path from `origin` to every reachable lane. Ties go
    /// to the lowest lane id. `parent[origin]` is `Some(origin)`.
    pub fn route_tree(&self, origin: LaneId) -> Vec<Option<LaneId>> {
        let mut parent = vec![None; self.lanes.len()];
        parent[origin] = Some(origin);
        let mut queue = VecDeque::from([origin]);
        while let Some(l) = queue.pop_front() {
            if self.is_exit(l) {
                continue;
            }
            for s in self.successors(l) {
                if parent[s].is_none() {
                    parent[s] = Some(l);
                    queue.push_back(s);
                }
            }
        }
        parent
    }

    pub fn reachable_exits(&self, origin: LaneId) -> Vec<LaneId> {
        let tree = self.route_tree(origin);
        self.exit_lanes.iter().copied().filter(|&e| e != origin && tree[e].is_some()).collect()
    }

    /// Shortest-hop route `origin → … → destination`, or `None` if unreachable.
    pub fn route(&self, origin: LaneId, destination: LaneId) -> Option<Vec<LaneId>> {
        let tree = self.route_tree(origin);
        tree[destination]?;
        let mut path = vec![destination];
        let mut cur = destination;
        while cur != origin {
            cur = tree[cur]?;
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }

    /// Phase count per agent, in agent order.
    pub fn phase_counts(&self) -> Vec<usize> {
        self.agents.iter().map(|&n| self.intersections[n].phases.len()).collect()
    }
}

/// Signalized pairs joined by a road that passes only unsignalized nodes.
fn road_adjacent_agents(
    intersections: &[Intersection],
    lanes: &[Lane],
    agent_of_node: &[Option<AgentId>],
) -> Vec<(AgentId, AgentId)> {
    let mut edges = Vec::new();
    for (node, inter) in intersections.iter().enumerate() {
        let Some(a) = agent_of_node[node] else { continue };
        let mut seen = vec![false; intersections.len()];
        seen[node] = true;
        let mut stack: Vec<NodeId> = inter.outgoing_lanes.iter().map(|&l| lanes[l].to).collect();
        while let Some(v) = stack.pop() {
            if core::mem::replace(&mut seen[v], true) {
                continue;
            }
            match agent_of_node[v] {
                Some(b) => {
                    if a < b {
                        edges.push((a, b));
                    } else {
                        edges.push((b, a));
                    }
                }
                None => stack.extend(intersections[v].outgoing_lanes.iter().map(|&l| lanes[l].to)),
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    fn of(dx: f64, dy: f64) -> Self {
        if dx.abs() >= dy.abs() {
            if dx > 0.0 {
                Heading::East
            } else {
                Heading::West
            }
        } else if dy > 0.0 {
            Heading::North
        } else {
            Heading::South
        }
    }

    fn right(self) -> Self {
        match self {
            Heading::North => Heading::East,
            Heading::East => Heading::South,
            Heading::South => Heading::West,
            Heading::West => Heading::North,
        }
    }

    fn opposite(self) -> Self {
        self.right().right()
    }

    fn is_vertical(self) -> bool {
        matches!(self, Heading::North | Heading::South)
    }
}

/// Bidirectional `rows × cols` Manhattan grid of signalized intersections.
///
/// Grid node `(r, c)` has id `r * cols + c` and sits at `(c·L, −r·L)`, so
/// row 0 is the northern edge. Each boundary side gets a stub node carrying
/// one entry and one exit lane. With two phases per node the phases are
/// north–south green then east–west green; four phases split each axis into
/// through-and-right and protected left. `rng_seed` is accepted for
/// interface stability; the grid layout is fully determined by its shape.
pub fn build_grid(
    rows: usize,
    cols: usize,
    lane_length: f64,
    phases_per_node: usize,
    rng_seed: u64,
) -> Result<TrafficNetwork> {
    let _ = rng_seed;
    if rows == 0 || cols == 0 {
        return Err(invalid!("grid dimensions must be positive, got {rows}x{cols}"));
    }
    if !(lane_length >= 100.0) {
        return Err(invalid!("lane length must be at least 100 m, got {lane_length}"));
    }
    if phases_per_node != 2 && phases_per_node != 4 {
        return Err(invalid!("phases per node must be 2 or 4, got {phases_per_node}"));
    }
    let len = lane_length;
    let mut nodes: Vec<(f64, f64, bool)> = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            nodes.push((c as f64 * len, -(r as f64) * len, true));
        }
    }
    let mut lanes: Vec<Lane> = Vec::new();
    let add_lane = |lanes: &mut Vec<Lane>, from: NodeId, to: NodeId| {
        let id = lanes.len();
        lanes.push(Lane::new(id, from, to, len, DEFAULT_FREE_FLOW_SPEED));
    };
    // Interior roads, horizontal then vertical.
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                add_lane(&mut lanes, v, v + 1);
                add_lane(&mut lanes, v + 1, v);
            }
            if r + 1 < rows {
                add_lane(&mut lanes, v, v + cols);
                add_lane(&mut lanes, v + cols, v);
            }
        }
    }
    // Boundary stubs: north, east, south, west sides in turn.
    let mut stubs: Vec<(NodeId, f64, f64)> = Vec::new();
    for c in 0..cols {
        stubs.push((c, c as f64 * len, len));
    }
    for r in 0..rows {
        stubs.push((r * cols + cols - 1, cols as f64 * len, -(r as f64) * len));
    }
    for c in 0..cols {
        stubs.push(((rows - 1) * cols + c, c as f64 * len, -(rows as f64) * len));
    }
    for r in 0..rows {
        stubs.push((r * cols, -len, -(r as f64) * len));
    }
    for (grid_node, x, y) in stubs {
        let stub = nodes.len();
        nodes.push((x, y, false));
        add_lane(&mut lanes, stub, grid_node);
        add_lane(&mut lanes, grid_node, stub);
    }

    let heading = |lane: &Lane| {
        let (fx, fy, _) = nodes[lane.from];
        let (tx, ty, _) = nodes[lane.to];
        Heading::of(tx - fx, ty - fy)
    };
    let mut phases = Vec::new();
    for node in 0..rows * cols {
        let incoming: Vec<&Lane> = lanes.iter().filter(|l| l.to == node).collect();
        let outgoing: Vec<&Lane> = lanes.iter().filter(|l| l.from == node).collect();
        // (vertical axis, left-turn group) → movements
        let mut groups: [Vec<(LaneId, LaneId)>; 4] = Default::default();
        for a in &incoming {
            let h = heading(a);
            for b in &outgoing {
                let hb = heading(b);
                if hb == h.opposite() {
                    continue;
                }
                let left = hb != h && hb != h.right();
                let idx = match (h.is_vertical(), left) {
                    (true, false) => 0,
                    (true, true) => 1,
                    (false, false) => 2,
                    (false, true) => 3,
                };
                groups[idx].push((a.id, b.id));
            }
        }
        let [ns, ns_left, ew, ew_left] = groups;
        if phases_per_node == 2 {
            let mut ns_all = ns;
            ns_all.extend(ns_left);
            let mut ew_all = ew;
            ew_all.extend(ew_left);
            phases.push((node, ns_all));
            phases.push((node, ew_all));
        } else {
            for g in [ns, ns_left, ew, ew_left] {
                if !g.is_empty() {
                    phases.push((node, g));
                }
            }
        }
    }

    TrafficNetwork::from_spec(NetworkSpec { nodes, lanes, phases, agent_edges: None, neighbor_threshold: 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node_grid() {
        let net = build_grid(1, 1, 200.0, 2, 7).unwrap();
        assert_eq!(net.agent_count(), 1);
        assert_eq!(net.entry_lanes().len(), 4);
        assert_eq!(net.exit_lanes().len(), 4);
        assert!(net.agent_graph().edges().is_empty());
        assert_eq!(net.agent_graph().local_region(0).unwrap(), vec![0]);
    }

    #[test]
    fn two_by_two_grid_has_two_neighbors_each() {
        let net = build_grid(2, 2, 200.0, 2, 7).unwrap();
        assert_eq!(net.agent_count(), 4);
        for a in 0..4 {
            assert_eq!(net.agent_graph().neighbors(a).len(), 2);
        }
        // Corner 0 touches 1 (east) and 2 (south).
        assert_eq!(net.agent_graph().local_region(0).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn three_by_three_degrees() {
        let net = build_grid(3, 3, 200.0, 2, 7).unwrap();
        let g = net.agent_graph();
        assert_eq!(g.neighbors(4), &[1, 3, 5, 7]);
        for corner in [0, 2, 6, 8] {
            assert_eq!(g.neighbors(corner).len(), 2);
        }
        assert_eq!(g.local_region(4).unwrap().len(), 5);
        assert_eq!(g.hop_distance(0, 8).unwrap(), Some(4));
        assert_eq!(g.hop_distance(3, 3).unwrap(), Some(0));
        assert_eq!(g.hop_distance(3, 4).unwrap(), Some(1));
    }

    #[test]
    fn grid_rejects_bad_arguments() {
        assert!(matches!(build_grid(0, 3, 200.0, 2, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_grid(2, 0, 200.0, 2, 0), Err(Error::InvalidArgument(_))));
        assert!(build_grid(2, 2, 50.0, 2, 0).is_err());
        assert!(build_grid(2, 2, 200.0, 3, 0).is_err());
    }

    #[test]
    fn disconnected_pairs_are_distinguished() {
        let g = AgentGraph::new(3, &[(0, 1)], 1).unwrap();
        assert_eq!(g.hop_distance(0, 2).unwrap(), None);
        assert!(g.hop_distance(0, 3).is_err());
        assert!(g.local_region(5).is_err());
        assert!(AgentGraph::new(2, &[(1, 1)], 1).is_err());
        assert!(AgentGraph::new(2, &[(0, 2)], 1).is_err());
    }

    #[test]
    fn wider_threshold_grows_neighborhoods() {
        let g = AgentGraph::new(4, &[(0, 1), (1, 2), (2, 3)], 2).unwrap();
        assert_eq!(g.neighbors(0), &[1, 2]);
        assert_eq!(g.neighbors(1), &[0, 2, 3]);
    }

    #[test]
    fn phases_cover_incoming_lanes_and_are_incident() {
        for phases in [2, 4] {
            let net = build_grid(3, 2, 150.0, phases, 0).unwrap();
            for a in 0..net.agent_count() {
                let inter = net.agent_intersection(a);
                assert_eq!(inter.phases.len(), phases);
                for p in &inter.phases {
                    for &(i, o) in &p.permitted_movements {
                        assert!(inter.incoming_lanes.contains(&i));
                        assert!(inter.outgoing_lanes.contains(&o));
                    }
                }
            }
        }
    }

    #[test]
    fn two_phase_grid_splits_axes() {
        let net = build_grid(1, 1, 200.0, 2, 0).unwrap();
        let inter = net.agent_intersection(0);
        let ns = &inter.phases[0];
        for &l in &inter.incoming_lanes {
            let vertical = net.intersection(net.lane(l).from).x == inter.x;
            assert_eq!(ns.serves(l), vertical);
            assert_eq!(inter.phases[1].serves(l), !vertical);
        }
    }

    #[test]
    fn routes_are_shortest_and_connected() {
        let net = build_grid(3, 3, 200.0, 2, 0).unwrap();
        for &entry in net.entry_lanes() {
            let exits = net.reachable_exits(entry);
            assert!(!exits.is_empty());
            for &exit in &exits {
                let route = net.route(entry, exit).unwrap();
                assert_eq!(route[0], entry);
                assert_eq!(*route.last().unwrap(), exit);
                for w in route.windows(2) {
                    assert!(net.movement_allowed(w[0], w[1]));
                }
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = NetworkSpec {
            nodes: vec![(0.0, 0.0, false), (100.0, 0.0, true), (200.0, 0.0, false)],
            lanes: vec![Lane::new(0, 0, 1, 100.0, 10.0), Lane::new(1, 1, 2, 100.0, 10.0)],
            phases: vec![(1, vec![(0, 1)])],
            agent_edges: None,
            neighbor_threshold: 1,
        };
        // One phase on a signalized node.
        assert!(TrafficNetwork::from_spec(spec.clone()).is_err());
        spec.phases.push((1, vec![(0, 1)]));
        assert!(TrafficNetwork::from_spec(spec.clone()).is_ok());
        spec.lanes[1].sensor_range = 500.0;
        assert!(TrafficNetwork::from_spec(spec.clone()).is_err());
        spec.lanes[1].sensor_range = 50.0;
        spec.phases[0].1 = vec![(1, 0)];
        assert!(TrafficNetwork::from_spec(spec).is_err());
    }
}

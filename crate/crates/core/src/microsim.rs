//! Point-queue traffic simulation.
//!
//! Vehicles travel at the lane's free-flow speed until they reach the
//! detector zone (`sensor_range` meters before the stop line), where they
//! join a vertical FIFO queue with speed zero. Queues discharge into the
//! next lane of each vehicle's route at the lane saturation rate while the
//! intersection shows a phase permitting that movement, and only if the
//! next lane has room (spillback). The clock advances in one-second ticks.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::invalid;
use crate::math::digest;
use crate::netmodel::{AgentId, LaneId, TrafficNetwork, VEHICLE_SPACING};
use crate::rng;
use crate::Result;
#[cfg(test)]
use crate::Error;

/// Default yellow interval, seconds.
pub const DEFAULT_YELLOW_SECONDS: u32 = 2;

pub type VehicleId = usize;

/// `count` vehicles inserted evenly over the first `window` seconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scenario {
    pub count: usize,
    pub window: u32,
}

impl Scenario {
    /// One vehicle per second for 2000 s.
    pub const LOW: Self = Self { count: 2000, window: 2000 };
    /// One vehicle per second over the whole hour.
    pub const MEDIUM: Self = Self { count: 3600, window: 3600 };
    /// Two vehicles per second for 2000 s.
    pub const HIGH: Self = Self { count: 4000, window: 2000 };

    pub const fn new(count: usize, window: u32) -> Self {
        Self { count, window }
    }

    /// Parses `count/window`, e.g. `2000/2000`.
    pub fn parse(text: &str) -> Result<Self> {
        let (c, w) = text.trim().split_once('/').ok_or_else(|| invalid!("scenario must look like COUNT/WINDOW, got {text:?}"))?;
        let count = c.trim().parse().map_err(|_| invalid!("bad vehicle count in scenario {text:?}"))?;
        let window: u32 = w.trim().parse().map_err(|_| invalid!("bad window in scenario {text:?}"))?;
        if window == 0 {
            return Err(invalid!("scenario window must be positive"));
        }
        Ok(Self { count, window })
    }

    pub fn name(&self) -> String {
        format!("{}/{}", self.count, self.window)
    }

    /// The same insertion rate over a different vehicle count.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { count: libm::round(self.count as f64 * factor) as usize, window: self.window }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InsertionEvent {
    pub time: u32,
    pub origin: LaneId,
    pub destination: LaneId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InsertionSchedule {
    pub scenario: Scenario,
    pub events: Vec<InsertionEvent>,
}

impl InsertionSchedule {
    pub fn empty() -> Self {
        Self { scenario: Scenario::new(0, 1), events: Vec::new() }
    }

    /// Hand-built schedule; events are sorted by time (stable).
    pub fn from_events(scenario: Scenario, mut events: Vec<InsertionEvent>) -> Self {
        events.sort_by_key(|e| e.time);
        Self { scenario, events }
    }

    pub fn digest(&self) -> u64 {
        let flat: Vec<f64> = self
            .events
            .iter()
            .flat_map(|e| [f64::from(e.time), e.origin as f64, e.destination as f64])
            .collect();
        digest(&flat)
    }
}

/// Draws `scenario.count` uniformly random origin/destination pairs, spread
/// evenly over `[0, window)`. Destinations are drawn among the exit lanes
/// reachable from the drawn origin.
pub fn make_schedule(
    network: &TrafficNetwork,
    scenario: Scenario,
    episode_seconds: u32,
    seed: u64,
) -> Result<InsertionSchedule> {
    if scenario.window > episode_seconds {
        return Err(invalid!("insertion window {} exceeds episode length {episode_seconds}", scenario.window));
    }
    if scenario.window == 0 {
        return Err(invalid!("insertion window must be positive"));
    }
    let entries = network.entry_lanes();
    let reachable: Vec<Vec<LaneId>> = entries.iter().map(|&e| network.reachable_exits(e)).collect();
    let mut rng = rng::stream(seed, rng::STREAM_SCHEDULE);
    let window = u64::from(scenario.window);
    let count = scenario.count as u64;
    let events = (0..count)
        .map(|k| {
            let o = rng.random_range(0..entries.len());
            let exits = &reachable[o];
            let d = exits[rng.random_range(0..exits.len())];
            InsertionEvent { time: (k * window / count) as u32, origin: entries[o], destination: d }
        })
        .collect();
    Ok(InsertionSchedule { scenario, events })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Position {
    /// Meters travelled from the lane start.
    Traveling(f64),
    /// Waiting in the stop-line queue.
    Queued,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vehicle {
    pub id: VehicleId,
    pub route: Vec<LaneId>,
    pub lane_index: usize,
    pub position: Position,
    pub entered_at: u32,
}

impl Vehicle {
    pub fn lane(&self) -> LaneId {
        self.route[self.lane_index]
    }

    pub fn next_lane(&self) -> Option<LaneId> {
        self.route.get(self.lane_index + 1).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseController {
    pub active_phase: usize,
    pub pending_phase: Option<usize>,
    pub yellow_remaining: u32,
}

impl PhaseController {
    pub fn new() -> Self {
        Self { active_phase: 0, pending_phase: None, yellow_remaining: 0 }
    }

    pub fn in_yellow(&self) -> bool {
        self.yellow_remaining > 0
    }

    /// Requests `phase`. Re-selecting the active phase is a no-op; a new
    /// request during yellow replaces the pending phase but keeps the timer.
    pub fn request(&mut self, phase: usize, yellow_seconds: u32) {
        if phase == self.active_phase {
            return;
        }
        if self.in_yellow() {
            self.pending_phase = Some(phase);
        } else if yellow_seconds == 0 {
            self.active_phase = phase;
        } else {
            self.pending_phase = Some(phase);
            self.yellow_remaining = yellow_seconds;
        }
    }

    fn advance(&mut self) {
        if self.yellow_remaining > 0 {
            self.yellow_remaining -= 1;
            if self.yellow_remaining == 0 {
                if let Some(p) = self.pending_phase.take() {
                    self.active_phase = p;
                }
            }
        }
    }
}

impl Default for PhaseController {
    fn default() -> Self {
        Self::new()
    }
}

/// Full simulation state for one episode.
#[derive(Clone, Debug)]
pub struct Sim<'a> {
    network: &'a TrafficNetwork,
    yellow_seconds: u32,
    clock: u32,
    vehicles: Vec<Option<Vehicle>>,
    /// Per lane, front = furthest along.
    traveling: Vec<VecDeque<VehicleId>>,
    queues: Vec<VecDeque<VehicleId>>,
    discharge_credit: Vec<f64>,
    controllers: Vec<PhaseController>,
    /// Per lane, scheduled vehicles waiting for room on an entry lane.
    waiting: Vec<VecDeque<InsertionEvent>>,
    schedule: InsertionSchedule,
    next_event: usize,
    routes: Vec<Option<Vec<Option<LaneId>>>>,
    inserted: u64,
    arrived: u64,
}

impl<'a> Sim<'a> {
    pub fn new(network: &'a TrafficNetwork, schedule: InsertionSchedule, yellow_seconds: u32) -> Self {
        let n = network.lanes().len();
        let mut routes = vec![None; n];
        for &e in network.entry_lanes() {
            routes[e] = Some(network.route_tree(e));
        }
        Self {
            network,
            yellow_seconds,
            clock: 0,
            vehicles: Vec::new(),
            traveling: vec![VecDeque::new(); n],
            queues: vec![VecDeque::new(); n],
            discharge_credit: vec![0.0; n],
            controllers: vec![PhaseController::new(); network.agent_count()],
            waiting: vec![VecDeque::new(); n],
            schedule,
            next_event: 0,
            routes,
            inserted: 0,
            arrived: 0,
        }
    }

    pub fn network(&self) -> &'a TrafficNetwork {
        self.network
    }

    pub fn clock(&self) -> u32 {
        self.clock
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn arrived(&self) -> u64 {
        self.arrived
    }

    pub fn controller(&self, agent: AgentId) -> &PhaseController {
        &self.controllers[agent]
    }

    pub fn vehicle(&self, id: VehicleId) -> Option<&Vehicle> {
        self.vehicles.get(id).and_then(Option::as_ref)
    }

    /// Vehicles currently on the network.
    pub fn running_vehicles(&self) -> u64 {
        self.inserted - self.arrived
    }

    /// Vehicles scheduled but still waiting outside a full entry lane.
    pub fn waiting_vehicles(&self) -> usize {
        self.waiting.iter().map(VecDeque::len).sum()
    }

    pub fn lane_occupancy(&self, lane: LaneId) -> usize {
        self.traveling[lane].len() + self.queues[lane].len()
    }

    pub fn lane_queue(&self, lane: LaneId) -> usize {
        self.queues[lane].len()
    }

    /// Vehicles within the detector range of the stop line. The k-th queued
    /// vehicle stands `k · 7.5` m back.
    pub fn lane_wave(&self, lane: LaneId) -> usize {
        let l = self.network.lane(lane);
        let queued_in_range = ((l.sensor_range / VEHICLE_SPACING) as usize + 1).min(self.queues[lane].len());
        let traveling_in_range = self.traveling[lane]
            .iter()
            .filter(|&&v| match self.vehicles[v].as_ref().map(|v| v.position) {
                Some(Position::Traveling(p)) => l.length - p <= l.sensor_range,
                _ => false,
            })
            .count();
        queued_in_range + traveling_in_range
    }

    /// Stopped vehicles on the agent's incoming lanes.
    pub fn measure_queue(&self, agent: AgentId) -> usize {
        self.network.agent_intersection(agent).incoming_lanes.iter().map(|&l| self.lane_queue(l)).sum()
    }

    /// Per incoming lane (in the intersection's lane order), the vehicles
    /// within detector range.
    pub fn measure_wave(&self, agent: AgentId) -> Vec<usize> {
        self.network.agent_intersection(agent).incoming_lanes.iter().map(|&l| self.lane_wave(l)).collect()
    }

    /// Requests a phase for `agent`; see [`PhaseController::request`].
    pub fn apply_action(&mut self, agent: AgentId, phase: usize) -> Result<()> {
        if agent >= self.controllers.len() {
            return Err(invalid!("unknown agent {agent}"));
        }
        let phases = self.network.agent_intersection(agent).phases.len();
        if phase >= phases {
            return Err(invalid!("phase {phase} does not belong to agent {agent} ({phases} phases)"));
        }
        self.controllers[agent].request(phase, self.yellow_seconds);
        Ok(())
    }

    /// Places a vehicle with the given route directly on the network,
    /// `distance_to_stop` meters before the stop line of the route's first
    /// lane. Returns its id.
    pub fn place_vehicle(&mut self, route: Vec<LaneId>, distance_to_stop: f64) -> Result<VehicleId> {
        let Some(&lane) = route.first() else {
            return Err(invalid!("empty route"));
        };
        for w in route.windows(2) {
            if !self.network.movement_allowed(w[0], w[1]) {
                return Err(invalid!("route moves from lane {} to {} illegally", w[0], w[1]));
            }
        }
        let len = self.network.lane(lane).length;
        if !(0.0..=len).contains(&distance_to_stop) {
            return Err(invalid!("distance {distance_to_stop} outside lane {lane}"));
        }
        let id = self.spawn(route, Position::Traveling(len - distance_to_stop));
        let pos = len - distance_to_stop;
        let at = self.traveling[lane]
            .iter()
            .position(|&v| matches!(self.vehicles[v].as_ref().map(|v| v.position), Some(Position::Traveling(p)) if p < pos))
            .unwrap_or(self.traveling[lane].len());
        self.traveling[lane].insert(at, id);
        Ok(id)
    }

    /// Places a queued vehicle at the back of the first route lane's queue.
    pub fn place_queued_vehicle(&mut self, route: Vec<LaneId>) -> Result<VehicleId> {
        let Some(&lane) = route.first() else {
            return Err(invalid!("empty route"));
        };
        let id = self.spawn(route, Position::Queued);
        self.queues[lane].push_back(id);
        Ok(id)
    }

    fn spawn(&mut self, route: Vec<LaneId>, position: Position) -> VehicleId {
        let id = self.vehicles.len();
        self.vehicles.push(Some(Vehicle { id, route, lane_index: 0, position, entered_at: self.clock }));
        self.inserted += 1;
        id
    }

    fn route_for(&self, origin: LaneId, destination: LaneId) -> Option<Vec<LaneId>> {
        let tree = self.routes[origin].as_ref()?;
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

    /// Advances the simulation by one second: insertion, movement, queue
    /// discharge, then signal timers.
    pub fn tick(&mut self) {
        self.insert_scheduled();
        self.move_vehicles();
        self.discharge_queues();
        for c in &mut self.controllers {
            c.advance();
        }
        self.clock += 1;
    }

    fn insert_scheduled(&mut self) {
        while let Some(ev) = self.schedule.events.get(self.next_event) {
            if ev.time > self.clock {
                break;
            }
            self.waiting[ev.origin].push_back(*ev);
            self.next_event += 1;
        }
        for li in 0..self.network.entry_lanes().len() {
            let lane = self.network.entry_lanes()[li];
            let capacity = self.network.lane(lane).capacity();
            while !self.waiting[lane].is_empty() && self.lane_occupancy(lane) < capacity {
                let Some(ev) = self.waiting[lane].pop_front() else { break };
                // Schedules only draw reachable pairs; anything else is dropped.
                if let Some(route) = self.route_for(ev.origin, ev.destination) {
                    let id = self.spawn(route, Position::Traveling(0.0));
                    self.traveling[lane].push_back(id);
                }
            }
        }
    }

    fn move_vehicles(&mut self) {
        for lane_id in 0..self.traveling.len() {
            if self.traveling[lane_id].is_empty() {
                continue;
            }
            let lane = self.network.lane(lane_id);
            let is_exit = self.network.is_exit(lane_id);
            for &v in &self.traveling[lane_id] {
                if let Some(veh) = self.vehicles[v].as_mut() {
                    if let Position::Traveling(p) = &mut veh.position {
                        *p += lane.free_flow_speed;
                    }
                }
            }
            let threshold = if is_exit { lane.length } else { lane.length - lane.sensor_range };
            while let Some(&front) = self.traveling[lane_id].front() {
                let reached = matches!(
                    self.vehicles[front].as_ref().map(|v| v.position),
                    Some(Position::Traveling(p)) if p >= threshold
                );
                if !reached {
                    break;
                }
                self.traveling[lane_id].pop_front();
                if is_exit {
                    self.vehicles[front] = None;
                    self.arrived += 1;
                } else {
                    if let Some(veh) = self.vehicles[front].as_mut() {
                        veh.position = Position::Queued;
                    }
                    self.queues[lane_id].push_back(front);
                }
            }
        }
    }

    fn movement_green(&self, from: LaneId, to: LaneId) -> bool {
        let node = self.network.lane(from).to;
        match self.network.agent_of_node(node) {
            Some(agent) => {
                let c = &self.controllers[agent];
                !c.in_yellow() && self.network.intersection(node).phases[c.active_phase].permits(from, to)
            }
            None => true,
        }
    }

    fn discharge_queues(&mut self) {
        for lane_id in 0..self.queues.len() {
            let Some(&head) = self.queues[lane_id].front() else {
                let rate = self.network.lane(lane_id).saturation_rate;
                self.discharge_credit[lane_id] = (self.discharge_credit[lane_id] + rate).min(rate.max(1.0));
                continue;
            };
            let rate = self.network.lane(lane_id).saturation_rate;
            let next_of = |sim: &Self, v: VehicleId| sim.vehicles[v].as_ref().and_then(Vehicle::next_lane);
            let Some(next) = next_of(self, head) else { continue };
            if !self.movement_green(lane_id, next) {
                self.discharge_credit[lane_id] = 0.0;
                continue;
            }
            self.discharge_credit[lane_id] = (self.discharge_credit[lane_id] + rate).min(rate.max(1.0));
            while self.discharge_credit[lane_id] >= 1.0 {
                let Some(&head) = self.queues[lane_id].front() else { break };
                let Some(next) = next_of(self, head) else { break };
                if !self.movement_green(lane_id, next) {
                    break;
                }
                if self.lane_occupancy(next) >= self.network.lane(next).capacity() {
                    break;
                }
                self.queues[lane_id].pop_front();
                if let Some(veh) = self.vehicles[head].as_mut() {
                    veh.lane_index += 1;
                    veh.position = Position::Traveling(0.0);
                }
                self.traveling[next].push_back(head);
                self.discharge_credit[lane_id] -= 1.0;
            }
        }
    }

    /// Vehicles actually present on lanes, counted from scratch.
    pub fn count_on_lanes(&self) -> u64 {
        (self.traveling.iter().map(VecDeque::len).sum::<usize>() + self.queues.iter().map(VecDeque::len).sum::<usize>())
            as u64
    }

    /// Fingerprint of the complete dynamic state (clock, counters, every
    /// vehicle's lane and position, signal controllers).
    pub fn state_digest(&self) -> u64 {
        let mut flat: Vec<f64> = vec![f64::from(self.clock), self.inserted as f64, self.arrived as f64];
        for (lane, (t, q)) in self.traveling.iter().zip(&self.queues).enumerate() {
            flat.push(lane as f64);
            for &v in t {
                flat.push(v as f64);
                if let Some(Position::Traveling(p)) = self.vehicles[v].as_ref().map(|v| v.position) {
                    flat.push(p);
                }
            }
            flat.push(-1.0);
            flat.extend(q.iter().map(|&v| v as f64));
        }
        for c in &self.controllers {
            flat.push(c.active_phase as f64);
            flat.push(c.pending_phase.map_or(-1.0, |p| p as f64));
            flat.push(f64::from(c.yellow_remaining));
        }
        digest(&flat)
    }
}

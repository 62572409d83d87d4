//! Flat `key = value` run configuration.
//!
//! Unknown keys are errors. Later lines override earlier ones, and command
//! line flags override the file. [`RunConfig::to_text`] writes every key in
//! a fixed order, so the text doubles as a canonical fingerprint of a run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use atsc_core::microsim::Scenario;
use atsc_core::netmodel::{build_grid, TrafficNetwork};
use atsc_core::trainer::{Algorithm, SeedMode, TrainConfig, DEFAULT_TEST_SEEDS};

use crate::error::{AtscError, Result};
use crate::netfile;

#[derive(Clone, Debug, PartialEq)]
pub enum NetworkSource {
    Grid { rows: usize, cols: usize, lane_length: f64, phases: usize },
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub network: NetworkSource,
    /// Hop radius of agent neighborhoods on generated grids.
    pub neighbor_threshold: usize,
    /// When set, overrides `total_sim_seconds` as `episodes × ts`.
    pub episodes: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            network: NetworkSource::Grid { rows: 3, cols: 3, lane_length: 200.0, phases: 2 },
            neighbor_threshold: 1,
            episodes: None,
        }
    }
}

fn bad(key: &str, value: &str, why: &str) -> AtscError {
    AtscError::Config(format!("{key} = {value}: {why}"))
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, "not a valid number"))
}

/// `RxC`, e.g. `3x3`.
pub fn parse_grid(value: &str) -> Result<(usize, usize)> {
    let (r, c) = value
        .split_once(['x', 'X'])
        .ok_or_else(|| bad("grid", value, "expected ROWSxCOLS"))?;
    Ok((number("grid", r.trim())?, number("grid", c.trim())?))
}

/// Comma-separated seeds, or `default` for the standard eight.
pub fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    if value.trim() == "default" {
        return Ok(DEFAULT_TEST_SEEDS.to_vec());
    }
    value.split(',').map(|s| number("test_seeds", s.trim())).collect()
}

impl RunConfig {
    /// Sets one key. Keys use the names written by [`RunConfig::to_text`]
    /// plus the shorthands `algo`, `seed`, `episodes` and `grid`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        let v = value.trim();
        let core = |e: atsc_core::Error| bad(key, v, &e.to_string());
        match key.trim() {
            "algorithm" | "algo" => t.algorithm = Algorithm::parse(v).map_err(core)?,
            "ts" => t.ts = number(key, v)?,
            "dt" => t.dt = number(key, v)?,
            "gamma" => t.gamma = number(key, v)?,
            "alpha" => t.alpha = number(key, v)?,
            "beta" => t.beta = number(key, v)?,
            "eta_theta" => t.eta_theta = number(key, v)?,
            "eta_psi" => t.eta_psi = number(key, v)?,
            "batch" => t.batch = number(key, v)?,
            "total_sim_seconds" => {
                t.total_sim_seconds = number(key, v)?;
                self.episodes = None;
            }
            "episodes" => self.episodes = Some(number(key, v)?),
            "scenario" => t.scenario = Scenario::parse(v).map_err(core)?,
            "seed_mode" => t.seed_mode = SeedMode::parse(v).map_err(core)?,
            "train_seed" | "seed" => t.train_seed = number(key, v)?,
            "test_seeds" => t.test_seeds = parse_seeds(v)?,
            "yellow" => t.yellow = number(key, v)?,
            "wave_norm" => t.wave_norm = number(key, v)?,
            "reward_norm" => t.reward_norm = number(key, v)?,
            "gradient_cap" => t.gradient_cap = number(key, v)?,
            "fc_wave" => t.fc_wave = number(key, v)?,
            "fc_fingerprint" => t.fc_fingerprint = number(key, v)?,
            "lstm" => t.lstm = number(key, v)?,
            "iql_lr_rate" => t.iql_lr_rate = number(key, v)?,
            "iql_dnn_rate" => t.iql_dnn_rate = number(key, v)?,
            "iql_hidden" => t.iql_hidden = number(key, v)?,
            "success_ratio" => t.success_ratio = number(key, v)?,
            "neighbor_threshold" => self.neighbor_threshold = number(key, v)?,
            "grid" => {
                let (rows, cols) = parse_grid(v)?;
                let (lane_length, phases) = self.grid_geometry();
                self.network = NetworkSource::Grid { rows, cols, lane_length, phases };
            }
            "lane_length" | "phases" => {
                let NetworkSource::Grid { lane_length, phases, .. } = &mut self.network else {
                    return Err(bad(key, v, "only applies to generated grids"));
                };
                if key == "lane_length" {
                    *lane_length = number(key, v)?;
                } else {
                    *phases = number(key, v)?;
                }
            }
            "network" => self.network = NetworkSource::File(PathBuf::from(v)),
            other => return Err(AtscError::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    fn grid_geometry(&self) -> (f64, usize) {
        match self.network {
            NetworkSource::Grid { lane_length, phases, .. } => (lane_length, phases),
            NetworkSource::File(_) => (200.0, 2),
        }
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let wrap = |message: String| AtscError::Parse { path: origin.to_string(), line: i + 1, message };
            let (k, v) = line.split_once('=').ok_or_else(|| wrap(format!("expected key = value, got '{line}'")))?;
            self.set(k.trim(), v.trim()).map_err(|e| match e {
                AtscError::Config(m) => wrap(m),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AtscError::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, &path.display().to_string())?;
        Ok(cfg)
    }

    /// Resolves `episodes` into the simulated-seconds cap and validates.
    pub fn finish(mut self) -> Result<Self> {
        if let Some(e) = self.episodes.take() {
            self.train.total_sim_seconds = e * u64::from(self.train.ts);
        }
        if self.neighbor_threshold == 0 {
            return Err(AtscError::Config("neighbor_threshold must be at least 1".into()));
        }
        self.train.validate()?;
        Ok(self)
    }

    /// Builds the road network and its canonical text.
    pub fn build_network(&self) -> Result<(TrafficNetwork, String)> {
        match &self.network {
            NetworkSource::Grid { rows, cols, lane_length, phases } => {
                let grid = build_grid(*rows, *cols, *lane_length, *phases, self.train.train_seed)?;
                let net = if self.neighbor_threshold == 1 {
                    grid
                } else {
                    let mut spec = netfile::parse_spec(&netfile::write(&grid), "grid")?;
                    spec.neighbor_threshold = self.neighbor_threshold;
                    TrafficNetwork::from_spec(spec)?
                };
                let text = netfile::write(&net);
                Ok((net, text))
            }
            NetworkSource::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| AtscError::io(path, e))?;
                let net = netfile::parse(&text, &path.display().to_string())?;
                let text = netfile::write(&net);
                Ok((net, text))
            }
        }
    }

    /// Every key in a fixed order. The network appears as its source; the
    /// network itself is stored separately in checkpoints.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let mut s = String::new();
        let seeds: Vec<String> = t.test_seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "algorithm = {}", t.algorithm.name());
        let _ = writeln!(s, "ts = {}", t.ts);
        let _ = writeln!(s, "dt = {}", t.dt);
        let _ = writeln!(s, "gamma = {}", t.gamma);
        let _ = writeln!(s, "alpha = {}", t.alpha);
        let _ = writeln!(s, "beta = {}", t.beta);
        let _ = writeln!(s, "eta_theta = {}", t.eta_theta);
        let _ = writeln!(s, "eta_psi = {}", t.eta_psi);
        let _ = writeln!(s, "batch = {}", t.batch);
        let total = self.episodes.map_or(t.total_sim_seconds, |e| e * u64::from(t.ts));
        let _ = writeln!(s, "total_sim_seconds = {total}");
        let _ = writeln!(s, "scenario = {}", t.scenario.name());
        let _ = writeln!(s, "seed_mode = {}", t.seed_mode.name());
        let _ = writeln!(s, "train_seed = {}", t.train_seed);
        let _ = writeln!(s, "test_seeds = {}", seeds.join(","));
        let _ = writeln!(s, "yellow = {}", t.yellow);
        let _ = writeln!(s, "wave_norm = {}", t.wave_norm);
        let _ = writeln!(s, "reward_norm = {}", t.reward_norm);
        let _ = writeln!(s, "gradient_cap = {}", t.gradient_cap);
        let _ = writeln!(s, "fc_wave = {}", t.fc_wave);
        let _ = writeln!(s, "fc_fingerprint = {}", t.fc_fingerprint);
        let _ = writeln!(s, "lstm = {}", t.lstm);
        let _ = writeln!(s, "iql_lr_rate = {}", t.iql_lr_rate);
        let _ = writeln!(s, "iql_dnn_rate = {}", t.iql_dnn_rate);
        let _ = writeln!(s, "iql_hidden = {}", t.iql_hidden);
        let _ = writeln!(s, "success_ratio = {}", t.success_ratio);
        let _ = writeln!(s, "neighbor_threshold = {}", self.neighbor_threshold);
        match &self.network {
            NetworkSource::Grid { rows, cols, lane_length, phases } => {
                let _ = writeln!(s, "grid = {rows}x{cols}");
                let _ = writeln!(s, "lane_length = {lane_length}");
                let _ = writeln!(s, "phases = {phases}");
            }
            NetworkSource::File(p) => {
                let _ = writeln!(s, "network = {}", p.display());
            }
        }
        s
    }
}

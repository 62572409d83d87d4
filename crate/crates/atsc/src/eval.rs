//! Test-seed evaluation, cross-load tables and stability counts.

use atsc_core::microsim::Scenario;
use atsc_core::netmodel::TrafficNetwork;
use atsc_core::trainer::{evaluate_episode, success_criterion, train, Algorithm, AgentModels, RunRecord, TrainConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AtscError, Result};

/// Environment variable bounding parallel training replicas.
pub const THREADS_ENV: &str = "ATSC_THREADS";

/// Per-seed average queues of one policy on one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub algorithm: String,
    pub scenario: String,
    pub seeds: Vec<u64>,
    pub average_queues: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl EvalReport {
    pub fn new(algorithm: Algorithm, scenario: Scenario, seeds: Vec<u64>, average_queues: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&average_queues);
        Self { algorithm: algorithm.name().to_string(), scenario: scenario.name(), seeds, average_queues, mean, std }
    }
}

/// One evaluation episode per seed; no learning.
pub fn evaluate(
    config: &TrainConfig,
    net: &TrafficNetwork,
    models: &AgentModels,
    scenario: Scenario,
    seeds: &[u64],
) -> Result<EvalReport> {
    let eval_cfg = TrainConfig { scenario, ..config.clone() };
    eval_cfg.validate()?;
    let queues = seeds
        .iter()
        .map(|&s| evaluate_episode(&eval_cfg, net, models, scenario, s).map(|e| e.average_queue))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(EvalReport::new(config.algorithm, scenario, seeds.to_vec(), queues))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossRow {
    pub trained_on: String,
    pub report: EvalReport,
}

/// Evaluates trained models on each scenario, each followed by a Greedy
/// row on the same scenario and seeds.
pub fn cross_test(
    config: &TrainConfig,
    net: &TrafficNetwork,
    models: &AgentModels,
    scenarios: &[Scenario],
    seeds: &[u64],
) -> Result<Vec<CrossRow>> {
    let trained_on = config.scenario.name();
    let greedy_cfg = TrainConfig { algorithm: Algorithm::Greedy, ..config.clone() };
    let mut rows = Vec::new();
    for &s in scenarios {
        rows.push(CrossRow { trained_on: trained_on.clone(), report: evaluate(config, net, models, s, seeds)? });
        if config.algorithm != Algorithm::Greedy {
            let report = evaluate(&greedy_cfg, net, &AgentModels::Greedy, s, seeds)?;
            rows.push(CrossRow { trained_on: "-".to_string(), report });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub algorithm: String,
    pub runs: usize,
    pub successes: usize,
    pub train_seeds: Vec<u64>,
    pub success_flags: Vec<bool>,
    /// Per run, the average-queue learning curve.
    pub curves: Vec<Vec<f64>>,
}

/// Counts runs whose records pass the success criterion.
pub fn count_successes(records: &[RunRecord], ratio: f64) -> usize {
    records.iter().filter(|r| success_criterion(r, ratio)).count()
}

/// Replica parallelism: `ATSC_THREADS` if set to a positive integer,
/// otherwise the number of available cores.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Trains each algorithm `n_runs` times with train seeds
/// `config.train_seed + k` and counts successful runs. Results do not depend
/// on the degree of parallelism.
pub fn stability_suite(
    config: &TrainConfig,
    net: &TrafficNetwork,
    algorithms: &[Algorithm],
    n_runs: usize,
) -> Result<Vec<StabilityRow>> {
    if n_runs == 0 {
        return Err(AtscError::Config("stability suite needs at least one run".into()));
    }
    if let Some(a) = algorithms.iter().find(|a| !a.is_learner()) {
        return Err(AtscError::Config(format!("{} does not learn; the stability suite only accepts learners", a.name())));
    }
    let jobs: Vec<(Algorithm, u64)> = algorithms
        .iter()
        .flat_map(|&a| (0..n_runs as u64).map(move |k| (a, config.train_seed.wrapping_add(k))))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| AtscError::Config(format!("cannot start worker threads: {e}")))?;
    let records: Vec<RunRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(algorithm, seed)| {
                let cfg = TrainConfig { algorithm, train_seed: seed, ..config.clone() };
                train(&cfg, net).map(|(_, r)| r)
            })
            .collect::<std::result::Result<Vec<_>, _>>()
    })?;
    Ok(algorithms
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let runs = &records[i * n_runs..(i + 1) * n_runs];
            let success_flags: Vec<bool> = runs.iter().map(|r| success_criterion(r, config.success_ratio)).collect();
            StabilityRow {
                algorithm: a.name().to_string(),
                runs: n_runs,
                successes: success_flags.iter().filter(|&&f| f).count(),
                train_seeds: jobs[i * n_runs..(i + 1) * n_runs].iter().map(|j| j.1).collect(),
                success_flags,
                curves: runs.iter().map(RunRecord::average_queue_curve).collect(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_of_known_values() {
        let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(m, 5.0);
        assert_eq!(s, 2.0);
        assert_eq!(mean_std(&[]), (0.0, 0.0));
    }

    #[test]
    fn flat_stub_never_succeeds() {
        let mut r = RunRecord::new(Algorithm::Ma2c);
        for k in 0..8 {
            r.episodes.push(atsc_core::trainer::EpisodeSummary {
                episode: k,
                seed: 0,
                schedule_digest: 0,
                interactions: 1,
                learning_steps: 0,
                average_queue: 3.0,
                mean_reward: 0.0,
                mean_loss: 0.0,
                epsilon: 0.0,
                inserted: 0,
                arrived: 0,
            });
        }
        assert_eq!(count_successes(&[r], 0.8), 0);
    }
}

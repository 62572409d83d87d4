//! Plot-ready series as CSV or JSON.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use atsc_core::trainer::RunRecord;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{AtscError, Result};
use crate::eval::EvalReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = AtscError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(AtscError::Config(format!("unknown export format `{other}` (csv, json)"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Json => "json",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Series {
    /// Cumulative learning steps vs episode average queue.
    Queue,
    /// Simulation tick vs running vehicles, last training episode.
    Running,
    /// Learning step vs per-agent losses.
    Loss,
}

impl Series {
    pub const ALL: [Series; 3] = [Series::Queue, Series::Running, Series::Loss];

    pub fn name(self) -> &'static str {
        match self {
            Self::Queue => "queue",
            Self::Running => "running",
            Self::Loss => "loss",
        }
    }
}

impl FromStr for Series {
    type Err = AtscError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| AtscError::Config(format!("unknown series `{s}` (queue, running, loss)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub episode: usize,
    pub learning_step: usize,
    pub average_queue: f64,
    pub mean_reward: f64,
    pub mean_loss: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunningRow {
    pub tick: usize,
    pub running: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub learning_step: usize,
    pub episode: usize,
    pub agent: usize,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
    pub actor_grad_norm: f64,
    pub critic_grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    pub average_queue: f64,
}

pub fn episode_rows(record: &RunRecord) -> Vec<EpisodeRow> {
    let mut step = 0;
    record
        .episodes
        .iter()
        .map(|e| {
            step += e.learning_steps;
            EpisodeRow {
                episode: e.episode,
                learning_step: step,
                average_queue: e.average_queue,
                mean_reward: e.mean_reward,
                mean_loss: e.mean_loss,
                epsilon: e.epsilon,
            }
        })
        .collect()
}

pub fn running_rows(running: &[u64]) -> Vec<RunningRow> {
    running.iter().enumerate().map(|(tick, &running)| RunningRow { tick, running }).collect()
}

pub fn loss_rows(record: &RunRecord) -> Vec<LossRow> {
    record
        .learning_steps
        .iter()
        .flat_map(|s| {
            s.agents.iter().enumerate().map(move |(agent, a)| LossRow {
                learning_step: s.step,
                episode: s.episode,
                agent,
                actor_loss: a.actor_loss,
                critic_loss: a.critic_loss,
                entropy: a.entropy,
                actor_grad_norm: a.actor_grad_norm,
                critic_grad_norm: a.critic_grad_norm,
            })
        })
        .collect()
}

pub fn seed_rows(report: &EvalReport) -> Vec<SeedRow> {
    report
        .seeds
        .iter()
        .zip(&report.average_queues)
        .map(|(&seed, &average_queue)| SeedRow { seed, average_queue })
        .collect()
}

/// Serializes rows. CSV floats use the shortest representation that parses
/// back to the same value, so the output is byte-stable and lossless.
pub fn to_bytes<T: Serialize>(rows: &[T], format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r)?;
            }
            w.into_inner().map_err(|e| AtscError::Config(format!("csv buffer: {e}")))
        }
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(rows)?;
            out.push(b'\n');
            Ok(out)
        }
    }
}

pub fn from_bytes<T: DeserializeOwned>(bytes: &[u8], format: Format) -> Result<Vec<T>> {
    match format {
        Format::Csv => {
            let mut r = csv::Reader::from_reader(bytes);
            Ok(r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?)
        }
        Format::Json => Ok(serde_json::from_slice(bytes)?),
    }
}

pub fn write_rows<T: Serialize>(rows: &[T], path: &Path, format: Format) -> Result<()> {
    let bytes = to_bytes(rows, format)?;
    std::fs::write(path, bytes).map_err(|e| AtscError::io(path, e))
}

pub fn read_rows<T: DeserializeOwned>(path: &Path, format: Format) -> Result<Vec<T>> {
    let bytes = std::fs::read(path).map_err(|e| AtscError::io(path, e))?;
    from_bytes(&bytes, format)
}

/// Writes one series of a run record.
pub fn export_record(record: &RunRecord, series: Series, path: &Path, format: Format) -> Result<()> {
    match series {
        Series::Queue => write_rows(&episode_rows(record), path, format),
        Series::Running => write_rows(&running_rows(&record.running_vehicles), path, format),
        Series::Loss => write_rows(&loss_rows(record), path, format),
    }
}

pub fn export_report(report: &EvalReport, path: &Path, format: Format) -> Result<()> {
    write_rows(&seed_rows(report), path, format)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<EpisodeRow> {
        (0..5)
            .map(|k| EpisodeRow {
                episode: k,
                learning_step: 18 * (k + 1),
                average_queue: 1.0 / (k as f64 + 3.0),
                mean_reward: -0.1 * k as f64 - 1e-17,
                mean_loss: 12345.678901234567,
                epsilon: 0.0,
            })
            .collect()
    }

    #[test]
    fn csv_has_header_plus_rows() {
        let bytes = to_bytes(&rows(), Format::Csv).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("episode,learning_step,average_queue"));
    }

    #[test]
    fn round_trip_both_formats() {
        for f in [Format::Csv, Format::Json] {
            let back: Vec<EpisodeRow> = from_bytes(&to_bytes(&rows(), f).unwrap(), f).unwrap();
            assert_eq!(back, rows(), "{f}");
        }
    }

    #[test]
    fn names_parse() {
        assert_eq!("CSV".parse::<Format>().unwrap(), Format::Csv);
        assert!("xml".parse::<Format>().is_err());
        for s in Series::ALL {
            assert_eq!(s.name().parse::<Series>().unwrap(), s);
        }
    }

    #[test]
    fn unwritable_path_is_an_error() {
        let err = write_rows(&rows(), Path::new("/nonexistent-dir/x.csv"), Format::Csv).unwrap_err();
        assert!(matches!(err, AtscError::Io { .. }));
    }
}

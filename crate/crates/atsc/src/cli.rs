//! Command line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use atsc_core::microsim::Scenario;
use atsc_core::netmodel::TrafficNetwork;
use atsc_core::trainer::{Algorithm, RunRecord, Trainer};
use clap::{Args, Parser, Subcommand};

use crate::checkpoint::Checkpoint;
use crate::config::{parse_seeds, RunConfig};
use crate::error::{AtscError, Result};
use crate::eval::{self, EvalReport};
use crate::export::{self, Format, Series};
use crate::netfile;

pub const CHECKPOINT_FILE: &str = "checkpoint.atsc";
pub const RECORD_FILE: &str = "record.json";

#[derive(Parser, Debug)]
#[command(name = "atsc", version, about = "Multi-agent actor-critic traffic signal control")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train agents and write a checkpoint plus a run record.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Evaluate a checkpoint over test seeds.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated seeds or `default`.
        #[arg(long)]
        seeds: Option<String>,
        /// Defaults to the training scenario.
        #[arg(long)]
        scenario: Option<String>,
        /// Evaluate on another network file.
        #[arg(long)]
        network: Option<PathBuf>,
        /// Also write the per-seed rows here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Evaluate a checkpoint across vehicle loads, with Greedy rows.
    Cross {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated COUNT/WINDOW scenarios.
        #[arg(long, required = true)]
        scenarios: String,
        #[arg(long)]
        seeds: Option<String>,
        /// JSON table output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train several replicas per algorithm and count successful runs.
    Stability {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// Comma-separated learners.
        #[arg(long, default_value = "ma2c,ia2c")]
        algos: String,
        /// JSON output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one series of a run record as CSV or JSON.
    Export {
        #[arg(long)]
        record: PathBuf,
        /// queue, running or loss.
        #[arg(long)]
        series: String,
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a network file for a generated grid.
    GenNet {
        #[arg(long, default_value = "3x3")]
        grid: String,
        #[arg(long, default_value_t = 200.0)]
        lane_length: f64,
        #[arg(long, default_value_t = 2)]
        phases: usize,
        #[arg(long, default_value_t = 1)]
        neighbor_threshold: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Run configuration flags. Each one overrides the key of the same name in
/// the `--config` file.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// Flat `key = value` file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, visible_alias = "algorithm")]
    algo: Option<String>,
    #[arg(long)]
    ts: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long, alias = "eta_theta")]
    eta_theta: Option<String>,
    #[arg(long, alias = "eta_psi")]
    eta_psi: Option<String>,
    #[arg(long)]
    batch: Option<String>,
    #[arg(long, alias = "total_sim_seconds")]
    total_sim_seconds: Option<String>,
    #[arg(long)]
    episodes: Option<String>,
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long, alias = "seed_mode")]
    seed_mode: Option<String>,
    #[arg(long, visible_alias = "train-seed", alias = "train_seed")]
    seed: Option<String>,
    #[arg(long, alias = "test_seeds")]
    test_seeds: Option<String>,
    #[arg(long)]
    yellow: Option<String>,
    #[arg(long, alias = "wave_norm")]
    wave_norm: Option<String>,
    #[arg(long, alias = "reward_norm")]
    reward_norm: Option<String>,
    #[arg(long, alias = "gradient_cap")]
    gradient_cap: Option<String>,
    #[arg(long, alias = "fc_wave")]
    fc_wave: Option<String>,
    #[arg(long, alias = "fc_fingerprint")]
    fc_fingerprint: Option<String>,
    #[arg(long)]
    lstm: Option<String>,
    #[arg(long, alias = "iql_lr_rate")]
    iql_lr_rate: Option<String>,
    #[arg(long, alias = "iql_dnn_rate")]
    iql_dnn_rate: Option<String>,
    #[arg(long, alias = "iql_hidden")]
    iql_hidden: Option<String>,
    #[arg(long, alias = "success_ratio")]
    success_ratio: Option<String>,
    #[arg(long, alias = "neighbor_threshold")]
    neighbor_threshold: Option<String>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, alias = "lane_length")]
    lane_length: Option<String>,
    #[arg(long)]
    phases: Option<String>,
    /// Network file instead of a generated grid.
    #[arg(long)]
    network: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        // Network source first so that grid geometry keys apply to it.
        let pairs: [(&str, &Option<String>); 31] = [
            ("network", &self.network),
            ("grid", &self.grid),
            ("lane_length", &self.lane_length),
            ("phases", &self.phases),
            ("neighbor_threshold", &self.neighbor_threshold),
            ("algorithm", &self.algo),
            ("ts", &self.ts),
            ("dt", &self.dt),
            ("gamma", &self.gamma),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("eta_theta", &self.eta_theta),
            ("eta_psi", &self.eta_psi),
            ("batch", &self.batch),
            ("total_sim_seconds", &self.total_sim_seconds),
            ("episodes", &self.episodes),
            ("scenario", &self.scenario),
            ("seed_mode", &self.seed_mode),
            ("train_seed", &self.seed),
            ("test_seeds", &self.test_seeds),
            ("yellow", &self.yellow),
            ("wave_norm", &self.wave_norm),
            ("reward_norm", &self.reward_norm),
            ("gradient_cap", &self.gradient_cap),
            ("fc_wave", &self.fc_wave),
            ("fc_fingerprint", &self.fc_fingerprint),
            ("lstm", &self.lstm),
            ("iql_lr_rate", &self.iql_lr_rate),
            ("iql_dnn_rate", &self.iql_dnn_rate),
            ("iql_hidden", &self.iql_hidden),
            ("success_ratio", &self.success_ratio),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.finish()
    }
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| AtscError::io("<stdout>", e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| AtscError::io(path, e))
}

fn parse_scenarios(list: &str) -> Result<Vec<Scenario>> {
    list.split(',')
        .map(|s| Scenario::parse(s.trim()).map_err(|e| AtscError::Config(e.to_string())))
        .collect()
}

fn parse_algorithms(list: &str) -> Result<Vec<Algorithm>> {
    list.split(',')
        .map(|s| Algorithm::parse(s.trim()).map_err(|e| AtscError::Config(e.to_string())))
        .collect()
}

/// Loads a checkpoint and, when given, swaps in another network file after a
/// compatibility check.
fn load_checkpoint(path: &Path, network: Option<&Path>) -> Result<(Checkpoint, TrafficNetwork)> {
    let ckpt = Checkpoint::load(path)?;
    let net = match network {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| AtscError::io(p, e))?;
            netfile::parse(&text, &p.display().to_string())?
        }
        None => ckpt.network.clone(),
    };
    ckpt.models
        .check_compatible(&ckpt.config.train, &net)
        .map_err(|e| AtscError::Incompatible(e.to_string()))?;
    Ok((ckpt, net))
}

pub fn format_report(report: &EvalReport) -> String {
    let mut s = format!("# {} on {}\nseed,average_queue\n", report.algorithm, report.scenario);
    for (seed, q) in report.seeds.iter().zip(&report.average_queues) {
        s.push_str(&format!("{seed},{q:.4}\n"));
    }
    s.push_str(&format!("# mean {:.4} std {:.4}\n", report.mean, report.std));
    s
}

/// Trains and writes `checkpoint.atsc` and `record.json` into `out`.
pub fn train_to_dir(cfg: &RunConfig, out: &Path, log: &mut dyn Write) -> Result<(Checkpoint, RunRecord)> {
    let (net, _) = cfg.build_network()?;
    let mut trainer = Trainer::new(cfg.train.clone(), &net)?;
    while !trainer.is_done() {
        let e = trainer.run_episode()?;
        let line = format!(
            "episode {} seed {} average_queue {:.4} mean_reward {:.4} learning_steps {}\n",
            e.episode, e.seed, e.average_queue, e.mean_reward, e.learning_steps
        );
        write_out(log, &line)?;
    }
    let (models, record) = trainer.finish();
    std::fs::create_dir_all(out).map_err(|e| AtscError::io(out, e))?;
    let ckpt = Checkpoint { config: cfg.clone(), network: net, models };
    ckpt.save(&out.join(CHECKPOINT_FILE))?;
    let mut json = serde_json::to_vec_pretty(&record)?;
    json.push(b'\n');
    write_file(&out.join(RECORD_FILE), &json)?;
    Ok((ckpt, record))
}

fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match command {
        Command::Train { config, out } => {
            let cfg = config.resolve()?;
            let started = Instant::now();
            train_to_dir(&cfg, &out, stdout)?;
            let _ = writeln!(stderr, "trained in {:.1} s", started.elapsed().as_secs_f64());
            write_out(stdout, &format!("wrote {} and {}\n", out.join(CHECKPOINT_FILE).display(), out.join(RECORD_FILE).display()))
        }
        Command::Eval { checkpoint, seeds, scenario, network, out, format } => {
            let format: Format = format.parse()?;
            let (ckpt, net) = load_checkpoint(&checkpoint, network.as_deref())?;
            let train = &ckpt.config.train;
            let seeds = match seeds {
                Some(s) => parse_seeds(&s)?,
                None => train.test_seeds.clone(),
            };
            let scenario = match scenario {
                Some(s) => Scenario::parse(&s).map_err(|e| AtscError::Config(e.to_string()))?,
                None => train.scenario,
            };
            let report = eval::evaluate(train, &net, &ckpt.models, scenario, &seeds)?;
            if let Some(path) = out {
                export::export_report(&report, &path, format)?;
            }
            write_out(stdout, &format_report(&report))
        }
        Command::Cross { checkpoint, scenarios, seeds, out } => {
            let (ckpt, net) = load_checkpoint(&checkpoint, None)?;
            let train = &ckpt.config.train;
            let seeds = match seeds {
                Some(s) => parse_seeds(&s)?,
                None => train.test_seeds.clone(),
            };
            let rows = eval::cross_test(train, &net, &ckpt.models, &parse_scenarios(&scenarios)?, &seeds)?;
            let mut text = String::from("trained_on,algorithm,scenario,mean,std\n");
            for r in &rows {
                let p = &r.report;
                text.push_str(&format!("{},{},{},{:.4},{:.4}\n", r.trained_on, p.algorithm, p.scenario, p.mean, p.std));
            }
            if let Some(path) = out {
                let mut json = serde_json::to_vec_pretty(&rows)?;
                json.push(b'\n');
                write_file(&path, &json)?;
            }
            write_out(stdout, &text)
        }
        Command::Stability { config, runs, algos, out } => {
            let cfg = config.resolve()?;
            let algorithms = parse_algorithms(&algos)?;
            let (net, _) = cfg.build_network()?;
            let started = Instant::now();
            let rows = eval::stability_suite(&cfg.train, &net, &algorithms, runs)?;
            let _ = writeln!(stderr, "stability suite took {:.1} s", started.elapsed().as_secs_f64());
            let mut text = String::from("algorithm,runs,successes\n");
            for r in &rows {
                text.push_str(&format!("{},{},{}\n", r.algorithm, r.runs, r.successes));
            }
            if let Some(path) = out {
                let mut json = serde_json::to_vec_pretty(&rows)?;
                json.push(b'\n');
                write_file(&path, &json)?;
            }
            write_out(stdout, &text)
        }
        Command::Export { record, series, format, out } => {
            let series: Series = series.parse()?;
            let format: Format = format.parse()?;
            let bytes = std::fs::read(&record).map_err(|e| AtscError::io(&record, e))?;
            let record: RunRecord = serde_json::from_slice(&bytes)?;
            export::export_record(&record, series, &out, format)?;
            write_out(stdout, &format!("wrote {}\n", out.display()))
        }
        Command::GenNet { grid, lane_length, phases, neighbor_threshold, seed, out } => {
            let mut cfg = RunConfig::default();
            cfg.set("grid", &grid)?;
            cfg.set("lane_length", &lane_length.to_string())?;
            cfg.set("phases", &phases.to_string())?;
            cfg.set("neighbor_threshold", &neighbor_threshold.to_string())?;
            cfg.set("train_seed", &seed.to_string())?;
            let (_, text) = cfg.finish()?.build_network()?;
            match out {
                Some(path) => write_file(&path, text.as_bytes()),
                None => write_out(stdout, &text),
            }
        }
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code: 0 on success, 2 on usage or configuration errors,
/// 1 otherwise.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = stderr.write_all(text.as_bytes());
            } else {
                let _ = stdout.write_all(text.as_bytes());
            }
            return e.exit_code();
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_config_error() {
                2
            } else {
                1
            }
        }
    }
}

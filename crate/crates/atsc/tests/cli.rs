use std::path::Path;
use std::process::{Command, Output};

use atsc::checkpoint::Checkpoint;
use atsc::export::{EpisodeRow, Format, LossRow, RunningRow};
use atsc_core::trainer::RunRecord;

fn atsc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atsc")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn train_small(dir: &Path, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec![
        "train", "--algo", "ma2c", "--grid", "2x2", "--scenario", "200/300", "--ts", "600", "--episodes", "2",
        "--seed", "42", "--out", out,
    ];
    args.extend_from_slice(extra);
    atsc(&args)
}

#[test]
fn no_arguments_prints_usage() {
    let o = atsc(&[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = atsc(&["eval", "--checkpoint", "x", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_config_file_exits_2_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "gamma = 0.9\nwarp = 9\n").unwrap();
    let o = atsc(&["train", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(":2") && err.contains("warp"), "{err}");
}

#[test]
fn train_then_eval_export_and_cross() {
    let dir = tempfile::tempdir().unwrap();
    let o = train_small(dir.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("episode ")).count(), 2);
    // Timing goes to stderr only, so stdout is reproducible.
    assert!(String::from_utf8_lossy(&o.stderr).contains("trained in"));
    let ckpt_path = dir.path().join("checkpoint.atsc");
    let record_path = dir.path().join("record.json");
    let ckpt = Checkpoint::load(&ckpt_path).unwrap();
    assert_eq!(ckpt.config.train.scenario.count, 200);
    let record: RunRecord = serde_json::from_slice(&std::fs::read(&record_path).unwrap()).unwrap();
    assert_eq!(record.episodes.len(), 2);

    let ckpt_arg = ckpt_path.to_str().unwrap();
    let o = atsc(&["eval", "--checkpoint", ckpt_arg, "--seeds", "default"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().filter(|l| l.chars().next().is_some_and(|c| c.is_ascii_digit())).collect();
    assert_eq!(rows.len(), 8, "{text}");
    assert!(rows[1].starts_with("20200,") && rows[6].starts_with("20200,"));
    // Same checkpoint and seeds, same report.
    assert_eq!(stdout(&atsc(&["eval", "--checkpoint", ckpt_arg, "--seeds", "default"])), text);

    let report = dir.path().join("report.json");
    let o = atsc(&["eval", "--checkpoint", ckpt_arg, "--seeds", "1,2,3", "--out", report.to_str().unwrap(), "--format", "json"]);
    assert!(o.status.success());
    let seeds: Vec<atsc::export::SeedRow> = atsc::export::read_rows(&report, Format::Json).unwrap();
    assert_eq!(seeds.iter().map(|s| s.seed).collect::<Vec<_>>(), vec![1, 2, 3]);

    for (series, format) in [("queue", "csv"), ("running", "csv"), ("loss", "json")] {
        let path = dir.path().join(format!("{series}.{format}"));
        let o = atsc(&["export", "--record", record_path.to_str().unwrap(), "--series", series, "--format", format, "--out", path.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let f: Format = format.parse().unwrap();
        match series {
            "queue" => assert_eq!(atsc::export::read_rows::<EpisodeRow>(&path, f).unwrap().len(), 2),
            "running" => assert_eq!(atsc::export::read_rows::<RunningRow>(&path, f).unwrap().len(), 600),
            _ => assert_eq!(atsc::export::read_rows::<LossRow>(&path, f).unwrap().len(), record.learning_steps.len() * 4),
        }
    }

    let o = atsc(&["cross", "--checkpoint", ckpt_arg, "--scenarios", "200/300,360/300", "--seeds", "5,6"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 5, "{text}");
    assert_eq!(text.lines().filter(|l| l.contains(",greedy,")).count(), 2, "{text}");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "gamma = 0.5\nbeta = 0.02\nepisodes = 1\n").unwrap();
    let o = train_small(dir.path(), &["--config", cfg.to_str().unwrap(), "--gamma", "0.7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ckpt = Checkpoint::load(&dir.path().join("checkpoint.atsc")).unwrap();
    assert_eq!(ckpt.config.train.gamma, 0.7);
    assert_eq!(ckpt.config.train.beta, 0.02);
    // `--episodes 2` on the command line beats the file's 1.
    assert_eq!(ckpt.config.train.episodes(), 2);
}

#[test]
fn eval_rejects_a_mismatched_network() {
    let dir = tempfile::tempdir().unwrap();
    assert!(train_small(dir.path(), &[]).status.success());
    let net = dir.path().join("big.net");
    assert!(atsc(&["gen-net", "--grid", "3x3", "--out", net.to_str().unwrap()]).status.success());
    let o = atsc(&[
        "eval",
        "--checkpoint",
        dir.path().join("checkpoint.atsc").to_str().unwrap(),
        "--network",
        net.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not fit"));
}

#[test]
fn stability_rejects_greedy() {
    let o = atsc(&["stability", "--algos", "greedy", "--runs", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gen_net_is_a_valid_network_file() {
    let o = atsc(&["gen-net", "--grid", "2x2", "--lane-length", "150", "--phases", "4"]);
    assert!(o.status.success());
    let net = atsc::netfile::parse(&stdout(&o), "stdout").unwrap();
    assert_eq!(net.agent_count(), 4);
    assert!(net.intersections().iter().filter(|i| i.signalized).all(|i| i.phases.len() == 4));
}

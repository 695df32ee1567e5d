#![allow(clippy::field_reassign_with_default)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dystil::gridworld::EnvKind;
use dystil::harness::{
    read_strategy_log, EvalReport, RunConfig, StrategyLogEntry, LLM_AUDIT_LOG, STRATEGY_LOG,
};
use dystil::llm_client::format_mock_script;
use dystil::policy::ModelConfig;

fn small_config(dir: &Path) -> PathBuf {
    let mut c = RunConfig::default();
    c.n_demos = 2;
    c.model = ModelConfig {
        embed_dim: 32,
        feature_buckets: 1024,
        value_hidden: 64,
        ..ModelConfig::default()
    };
    c.bc.epochs = 2;
    c.ppo.num_workers = 2;
    c.ppo.frames_per_worker = 32;
    c.ppo.total_frames = 128;
    c.dystil.k = 3;
    c.dystil.eval_episodes = 2;
    c.eval.test_episodes = 4;
    c.eval.validation_episodes = 2;
    let path = dir.join("run.toml");
    std::fs::write(&path, c.to_toml()).unwrap();
    path
}

fn mock(dir: &Path, replies: &[&str]) -> PathBuf {
    let path = dir.join("mock.script");
    let replies: Vec<String> = replies.iter().map(|s| s.to_string()).collect();
    std::fs::write(&path, format_mock_script(&replies)).unwrap();
    path
}

fn dystil(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_dystil"))
        .arg("--config")
        .arg(small_config(dir))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .output()
        .unwrap();
    if !out.status.success() {
        panic!(
            "dystil {args:?} failed:\n{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    out
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn record_then_induce() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = dystil(d, &["record-demos", "--n", "3"]);
    assert!(stdout(&out).starts_with("wrote 3 demonstrations"));
    let m = mock(
        d,
        &["Here:\n1. **Avoid balls:** turn away\n2. **Go:** forward"],
    );
    let demos = d.join("demos.jsonl");
    let out = dystil(
        d,
        &[
            "--mock",
            m.to_str().unwrap(),
            "induce",
            "--demos",
            demos.to_str().unwrap(),
        ],
    );
    assert_eq!(
        stdout(&out),
        "1. Avoid balls:\n  - turn away\n2. Go:\n  - forward\n"
    );
    let audit = std::fs::read_to_string(d.join(LLM_AUDIT_LOG)).unwrap();
    assert_eq!(audit.lines().count(), 1);
}

#[test]
fn no_strategy_mode_never_calls_the_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let m = mock(d, &[]);
    let out = dystil(
        d,
        &[
            "--mock",
            m.to_str().unwrap(),
            "train",
            "--mode",
            "no-strategy",
        ],
    );
    assert!(
        stdout(&out).contains("0 strategy-model calls"),
        "{}",
        stdout(&out)
    );
    let audit = std::fs::read_to_string(d.join(LLM_AUDIT_LOG)).unwrap_or_default();
    assert!(audit.is_empty());
}

#[test]
fn inspect_shows_each_epoch_and_eval_counts_episodes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let m = mock(
        d,
        &[
            "1. Avoid balls: turn away",
            "1. Avoid balls: turn away early\n2. Goal: go",
            "1. Go: forward",
        ],
    );
    dystil(
        d,
        &[
            "--mock",
            m.to_str().unwrap(),
            "train",
            "--mode",
            "dystil",
            "--epochs",
            "2",
        ],
    );

    let log = read_strategy_log(&std::fs::read_to_string(d.join(STRATEGY_LOG)).unwrap()).unwrap();
    assert!(matches!(log[0], StrategyLogEntry::Initial { .. }));
    assert_eq!(log.len(), 3);
    let text = stdout(&dystil(d, &["inspect-strategies"]));
    assert!(text.contains("Avoid balls"), "{text}");
    for epoch in 1..=2 {
        assert!(text.contains(&format!("epoch {epoch}")), "{text}");
    }

    let report = d.join("eval100.json");
    dystil(
        d,
        &[
            "eval",
            "--episodes",
            "100",
            "--output",
            report.to_str().unwrap(),
        ],
    );
    let r: EvalReport = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(
        (r.n_episodes, r.returns.len(), r.seeds.len()),
        (100, 100, 100)
    );
    assert!(r.seeds.iter().all(|&s| (3000..3100).contains(&s)));
}

#[test]
fn bc_train_writes_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let strategies = d.join("s.txt");
    std::fs::write(&strategies, "1. Avoid balls: turn away").unwrap();
    let out = dystil(
        d,
        &["bc-train", "--strategies", strategies.to_str().unwrap()],
    );
    assert!(stdout(&out).contains("accuracy"));
    let agent = dystil::policy::load_checkpoint(&d.join("checkpoints/bc.ckpt")).unwrap();
    assert_eq!(agent.memory.len(), 1);
}

#[test]
fn bad_invocations_fail() {
    let bin = env!("CARGO_BIN_EXE_dystil");
    let s = Command::new(bin)
        .args(["train", "--mode", "sometimes"])
        .output()
        .unwrap();
    assert!(!s.status.success());
    let s = Command::new(bin)
        .args(["--env", "lava-pit", "eval"])
        .output()
        .unwrap();
    assert!(!s.status.success());
    let dir = tempfile::tempdir().unwrap();
    let s = Command::new(bin)
        .arg("--out-dir")
        .arg(dir.path())
        .arg("inspect-strategies")
        .output()
        .unwrap();
    assert_eq!(s.status.code(), Some(1));
}

#[test]
fn env_names_agree_between_cli_and_config() {
    for kind in EnvKind::ALL {
        let parsed: EnvKind = kind.slug().parse().unwrap();
        assert_eq!(parsed, kind);
        let mut c = RunConfig::default();
        c.env = kind;
        assert!(c.to_toml().contains(&format!("env = \"{}\"", kind.slug())));
    }
}

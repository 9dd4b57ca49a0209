use std::process::{Command, Output};

use drlc_core::harness::ExperimentConfig;

fn drlc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drlc"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn print_config_is_a_valid_experiment_file() {
    let out = drlc(&["example2", "--desk", "--episodes", "7", "--print-config"]);
    assert!(out.status.success());
    let config = ExperimentConfig::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(config.episodes, 7);
    assert_eq!(config.agent.actor_network.hidden[0].width, 64);
    assert!(!config.agent.critic_network.hidden[1].batch_norm);
}

#[test]
fn run_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("ex1.toml");
    let out = drlc(&["example1", "--desk", "--episodes", "2", "--print-config"]);
    std::fs::write(&config, &out.stdout).unwrap();
    let run_dir = dir.path().join("run");
    let out = drlc(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        run_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let episodes = std::fs::read_to_string(run_dir.join("episodes.csv")).unwrap();
    assert_eq!(episodes.lines().count(), 3);

    let out = drlc(&[
        "eval",
        "--checkpoint",
        run_dir.join("checkpoint.txt").to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--tolerance",
        "0.1",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text.lines().filter(|l| l.starts_with("setpoint")).count(),
        21
    );
    assert!(text.contains("/21 within 0.1"));
}

#[test]
fn bad_config_reports_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    let out = drlc(&["example1", "--print-config"]);
    let text = String::from_utf8(out.stdout)
        .unwrap()
        .replace("gamma = 0.99", "gamma = 2.0");
    std::fs::write(&config, text).unwrap();
    let out = drlc(&["run", "--config", config.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error:") && err.contains("agent"), "{err}");
}

#[test]
fn missing_file_fails_cleanly() {
    let out = drlc(&["run", "--config", "/nonexistent/drlc.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("/nonexistent/drlc.toml"));
}

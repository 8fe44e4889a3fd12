use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "[experiment]\nepisodes = 3\neval_episodes = 2\nseeds = [1]\n[env]\nepisode_length = 10\n[agent]\nlearning_starts = 16\nbatch_size = 8\n";

fn genv2v(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genv2v")).args(args).output().expect("binary runs")
}

fn tiny_config(dir: &Path) -> String {
    let path = dir.join("tiny.toml");
    fs::write(&path, TINY).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn train_writes_metrics_and_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("out");
    let o = genv2v(&["train", "--config", &cfg, "--agent", "ddqn", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["train_ddqn_seed1.csv", "eval_ddqn_seed1.csv", "ddqn_seed1.bin", "run_metadata.toml"] {
        assert!(out.join(name).exists(), "missing {name}");
    }

    let eval_out = dir.path().join("eval");
    let ckpt = out.join("ddqn_seed1.bin");
    let o = genv2v(&["eval", "--checkpoint", ckpt.to_str().unwrap(), "--config", &cfg, "--out", eval_out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read(out.join("eval_ddqn_seed1.csv")).unwrap(),
        fs::read(eval_out.join("eval_ddqn_seed1.csv")).unwrap()
    );
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let o = genv2v(&["train", "--config", &cfg, "--agent", "oracle", "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[agent]\ngamma = 1.5\n").unwrap();
    let o = genv2v(&["train", "--config", bad.to_str().unwrap(), "--agent", "random", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma"));

    let o = genv2v(&["sweep", "--config", &cfg, "--payloads", "5000,10000", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn summary_of_empty_directory_fails_checks() {
    let dir = tempfile::tempdir().unwrap();
    let o = genv2v(&["summary", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("[FAIL]")).count(), 3);
}

#[test]
fn sweep_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    fs::write(&cfg, TINY.replace("[env]", "sweep_agents = [\"greedy\", \"random\"]\n[env]")).unwrap();
    let out = dir.path().join("out");
    let o = genv2v(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--payloads",
        "5000,20000,80000",
        "--jobs",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().filter(|l| !l.starts_with('#')).count(), 1 + 3 * 2);
}

#[test]
fn selftest_passes() {
    let o = genv2v(&["selftest"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().filter(|l| l.starts_with("[PASS]")).count(), 5);
}

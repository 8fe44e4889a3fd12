use std::fs;
use std::path::Path;

use genv2v_core::agents::PolicyKind;
use genv2v_core::harness::{
    self, checks, parse_config_str, read_csv, run_checkpoint_eval, run_sweep, run_training, stats,
    ExperimentConfig, SWEEP_CSV,
};
use statrs::distribution::{ContinuousCDF, StudentsT};

fn quick(episodes: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.experiment.episodes = episodes;
    c.experiment.eval_episodes = 2;
    c.experiment.smoothing_window = 5;
    c.agent.learning_starts = 200;
    c
}

#[test]
fn training_output_is_reproducible_and_documented() {
    let dir = tempfile::tempdir().unwrap();
    let config = quick(8);
    let a = run_training(&config, PolicyKind::Ddqn, 3, &dir.path().join("a")).unwrap();
    let b = run_training(&config, PolicyKind::Ddqn, 3, &dir.path().join("b")).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let table = read_csv(&a).unwrap();
    assert_eq!(table.meta("agent"), Some("ddqn"));
    assert_eq!(table.meta("seed"), Some("3"));
    assert_eq!(table.meta("config_hash"), Some(config.hash().as_str()));
    assert!(table.meta("artifact_version").is_some());
    assert_eq!(
        table.header[..6],
        ["seed", "episode", "raw_reward", "smoothed_reward", "mean_system_qoe", "successful_data_bits"]
    );
    assert_eq!(table.header.len(), 6 + 2 * config.env.num_links);
    assert_eq!(table.rows.len(), 8);
    let raw = table.column("raw_reward").unwrap();
    let smoothed = table.column("smoothed_reward").unwrap();
    assert_eq!(smoothed, harness::sliding_window_smooth(&raw, 5).unwrap());
    assert!(table.column("successful_data_bits").unwrap().iter().all(|&d| d >= 0.0));

    let out = dir.path().join("a");
    let metadata = fs::read_to_string(out.join("run_metadata.toml")).unwrap();
    let echoed = metadata.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    assert_eq!(parse_config_str(&echoed, Path::new("run_metadata.toml")).unwrap(), config);
    assert!(out.join("ddqn_seed3.bin").exists());
    assert!(out.join("ddqn_seed3.bin.meta").exists());
}

#[test]
fn checkpoint_evaluation_reproduces_in_process_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = quick(6);
    config.experiment.seeds = vec![4];
    run_training(&config, PolicyKind::Dqn, 4, dir.path()).unwrap();
    let fresh = dir.path().join("reloaded");
    let paths = run_checkpoint_eval(&config, &dir.path().join("dqn_seed4.bin"), &fresh).unwrap();
    assert_eq!(paths.len(), 1);
    assert_eq!(
        fs::read(&paths[0]).unwrap(),
        fs::read(dir.path().join("eval_dqn_seed4.csv")).unwrap()
    );
}

#[test]
fn random_agent_reward_has_no_trend() {
    let config = quick(150);
    let slopes: Vec<f64> = [1u64, 2, 3, 4, 5]
        .iter()
        .map(|&seed| {
            let run = harness::train(&config, PolicyKind::Random, seed).unwrap();
            let raw: Vec<f64> = run.rows.iter().map(|r| r.raw_reward).collect();
            stats::trend(&raw).0
        })
        .collect();
    let t = stats::mean(&slopes) / (stats::std_dev(&slopes) / (slopes.len() as f64).sqrt());
    let p = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, 4.0).unwrap().cdf(t.abs()));
    assert!(p > 0.01, "slopes {slopes:?}, t = {t}, p = {p}");
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = quick(3);
    config.experiment.seeds = vec![1, 2];
    config.experiment.sweep_agents = vec![PolicyKind::Ddqn, PolicyKind::Greedy, PolicyKind::Random];
    let payloads = [5_000.0, 20_000.0, 80_000.0];
    let serial = run_sweep(&config, &payloads, &dir.path().join("serial"), 1).unwrap();
    let parallel = run_sweep(&config, &payloads, &dir.path().join("parallel"), 3).unwrap();
    assert_eq!(fs::read(&serial).unwrap(), fs::read(&parallel).unwrap());
    let table = harness::read_sweep_csv(&serial).unwrap();
    assert_eq!(table.points.len(), 9);
    assert!(table.points.iter().all(|p| p.n == 2));
    assert!(dir.path().join("serial/payload_5000/train_greedy_seed2.csv").exists());

    let results = checks::summary(&dir.path().join("serial"));
    assert_eq!(results.len(), 3);
    // no training CSVs at the top level: the ordering check reports what is missing
    assert!(!results[0].passed);
    assert!(dir.path().join("serial").join(SWEEP_CSV).exists());
}

#[test]
fn config_errors_are_reported_as_such() {
    let err = parse_config_str("[experiment]\nepisodez = 3\n", Path::new("x.toml")).unwrap_err();
    assert!(err.is_config_error());
    assert!(err.to_string().contains("line 2"), "{err}");
    let err = parse_config_str("[env]\npower_budget = 0.01\n", Path::new("x.toml")).unwrap_err();
    assert!(err.is_config_error());
    let err = parse_config_str("[env]\nslot_duration = 2.0\n", Path::new("x.toml")).unwrap_err();
    assert!(err.to_string().contains("coherence time"), "{err}");
}

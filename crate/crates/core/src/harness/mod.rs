//! Experiment orchestration: configuration, training and evaluation loops,
//! payload sweeps, CSV output and the acceptance checks.

pub mod checks;
mod config;
mod run;
pub mod stats;
mod sweep;

pub use checks::CheckResult;
pub use config::{parse_config, parse_config_str, ExperimentConfig, ExperimentSettings, ARTIFACT_VERSION};
pub use run::{
    eval_csv_name, evaluate, read_csv, read_text_column, render_eval_csv, render_metrics_csv, run_checkpoint_eval,
    run_episode, run_training, seeded_env_config, sliding_window_smooth, successful_data_metric, train,
    train_csv_name, write_run, CsvTable, EpisodeSummary, MetricsRow, TrainedRun,
};
pub use sweep::{
    payload_sweep, read_sweep_csv, render_per_seed_csv, render_sweep_csv, run_sweep, sweep_job, SweepPoint,
    SweepSample, SweepTable, SWEEP_CSV, SWEEP_PER_SEED_CSV,
};

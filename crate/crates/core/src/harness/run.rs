//! Training and evaluation loops, per-episode metrics and their CSV files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, ARTIFACT_VERSION};
use crate::agents::{self, build_policy, DqnAgent, Mode, Policy, PolicyKind, TargetRule};
use crate::env::{Env, EnvConfig};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, tag};

/// Outcome of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub mean_reward: f64,
    pub mean_system_qoe: f64,
    /// Payload bits each link delivered over the episode.
    pub delivered_bits: Vec<f64>,
    /// Windowed outage of each link at episode end.
    pub final_outage: Vec<f64>,
    pub constraint_satisfied: Vec<bool>,
    pub mean_loss: Option<f64>,
}

impl EpisodeSummary {
    /// Delivered bits of the links that met the outage cap; violators count zero.
    pub fn successful_data_bits(&self) -> f64 {
        self.delivered_bits
            .iter()
            .zip(&self.constraint_satisfied)
            .filter(|(_, &ok)| ok)
            .fold(0.0, |acc, (b, _)| acc + b)
    }
}

/// Mean over episodes of the constraint-gated delivered bits.
pub fn successful_data_metric(trace: &[EpisodeSummary]) -> f64 {
    if trace.is_empty() {
        return 0.0;
    }
    trace.iter().map(EpisodeSummary::successful_data_bits).sum::<f64>() / trace.len() as f64
}

/// Trailing moving average; the first `window - 1` entries average what is available.
pub fn sliding_window_smooth(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::Domain("smoothing window must be at least 1".into()));
    }
    Ok((0..series.len())
        .map(|i| {
            let w = &series[(i + 1).saturating_sub(window)..=i];
            // Offsets from the first element keep constant series exact.
            let anchor = w[0];
            anchor + w.iter().map(|x| x - anchor).sum::<f64>() / w.len() as f64
        })
        .collect())
}

/// Play one episode. In [`Mode::Train`] the policy observes every slot.
pub fn run_episode(env: &mut Env, policy: &mut dyn Policy, episode_seed: u64, mode: Mode) -> Result<EpisodeSummary> {
    let mut obs = env.reset(episode_seed)?;
    let k = env.num_links();
    let cap = env.config().qoe.outage_cap;
    let mut reward_sum = 0.0;
    let mut qoe_sum = 0.0;
    let mut delivered = vec![0.0; k];
    let mut outage = vec![0.0; k];
    let mut loss = (0.0, 0usize);
    let mut slots = 0usize;
    loop {
        let actions = policy.act(env, &obs, mode)?;
        let result = env.step(&actions)?;
        if mode == Mode::Train {
            if let Some(l) = policy.observe(&obs, &actions, &result)? {
                loss.0 += l;
                loss.1 += 1;
            }
        }
        slots += 1;
        reward_sum += result.reward;
        qoe_sum += result.info.system_qoe;
        delivered.iter_mut().zip(&result.info.delivered_bits).for_each(|(d, b)| *d += b);
        outage.copy_from_slice(&result.info.outage);
        let done = result.done;
        obs = result.obs;
        if done {
            break;
        }
    }
    Ok(EpisodeSummary {
        mean_reward: reward_sum / slots as f64,
        mean_system_qoe: qoe_sum / slots as f64,
        delivered_bits: delivered,
        constraint_satisfied: outage.iter().map(|&o| o <= cap).collect(),
        final_outage: outage,
        mean_loss: (loss.1 > 0).then(|| loss.0 / loss.1 as f64),
    })
}

/// One per-episode record of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub seed: u64,
    pub episode: usize,
    pub raw_reward: f64,
    pub smoothed_reward: f64,
    pub mean_system_qoe: f64,
    pub successful_data_bits: f64,
    pub outage: Vec<f64>,
    pub constraint_satisfied: Vec<bool>,
}

/// Results of training one agent for one seed, followed by evaluation.
pub struct TrainedRun {
    pub kind: PolicyKind,
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
    pub eval: Vec<EpisodeSummary>,
    pub policy: Box<dyn Policy>,
}

impl TrainedRun {
    pub fn eval_mean_qoe(&self) -> f64 {
        super::stats::mean(&self.eval.iter().map(|e| e.mean_system_qoe).collect::<Vec<_>>())
    }

    pub fn eval_successful_data(&self) -> f64 {
        successful_data_metric(&self.eval)
    }
}

/// Environment configuration used for experiment seed `seed`.
pub fn seeded_env_config(config: &ExperimentConfig, seed: u64) -> EnvConfig {
    EnvConfig {
        seed: derive_seed(config.env.seed, &[seed]),
        ..config.env.clone()
    }
}

/// Episode seeds reserved for evaluation, disjoint from training episodes.
fn eval_episode_seed(e: usize) -> u64 {
    derive_seed(tag::EVAL, &[e as u64])
}

pub fn evaluate(config: &ExperimentConfig, policy: &mut dyn Policy, seed: u64) -> Result<Vec<EpisodeSummary>> {
    let mut env = Env::new(seeded_env_config(config, seed))?;
    (0..config.experiment.eval_episodes)
        .map(|e| run_episode(&mut env, policy, eval_episode_seed(e), Mode::Eval))
        .collect()
}

/// Train `kind` for `config.experiment.episodes` episodes, then evaluate it.
pub fn train(config: &ExperimentConfig, kind: PolicyKind, seed: u64) -> Result<TrainedRun> {
    config.validate()?;
    let mut env = Env::new(seeded_env_config(config, seed))?;
    let episodes = config.experiment.episodes;
    let total_slots = (episodes * config.env.episode_length) as u64;
    let mut policy = build_policy(kind, &env, &config.agent, derive_seed(seed, &[tag::AGENT]), total_slots)?;
    let mut rows = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        let s = run_episode(&mut env, policy.as_mut(), ep as u64, Mode::Train)?;
        if let Some(l) = s.mean_loss {
            log::debug!("{kind} seed {seed} episode {ep}: reward {:.4} loss {l:.5}", s.mean_reward);
        }
        rows.push(MetricsRow {
            seed,
            episode: ep,
            raw_reward: s.mean_reward,
            smoothed_reward: 0.0,
            mean_system_qoe: s.mean_system_qoe,
            successful_data_bits: s.successful_data_bits(),
            outage: s.final_outage.clone(),
            constraint_satisfied: s.constraint_satisfied.clone(),
        });
    }
    let raw: Vec<f64> = rows.iter().map(|r| r.raw_reward).collect();
    for (row, s) in rows.iter_mut().zip(sliding_window_smooth(&raw, config.experiment.smoothing_window)?) {
        row.smoothed_reward = s;
    }
    let eval = evaluate(config, policy.as_mut(), seed)?;
    Ok(TrainedRun {
        kind,
        seed,
        rows,
        eval,
        policy,
    })
}

pub fn train_csv_name(kind: PolicyKind, seed: u64) -> String {
    format!("train_{kind}_seed{seed}.csv")
}

pub fn eval_csv_name(kind: PolicyKind, seed: u64) -> String {
    format!("eval_{kind}_seed{seed}.csv")
}

fn metadata_header(config: &ExperimentConfig, kind: PolicyKind, seed: u64) -> String {
    format!(
        "# artifact_version={ARTIFACT_VERSION}\n# config_hash={}\n# env_config_hash={}\n# agent={kind}\n# seed={seed}\n",
        config.hash(),
        config.env_hash()
    )
}

fn link_columns(out: &mut String, k: usize) {
    for i in 0..k {
        let _ = write!(out, ",outage_{i}");
    }
    for i in 0..k {
        let _ = write!(out, ",constraint_satisfied_{i}");
    }
    out.push('\n');
}

fn link_values(out: &mut String, outage: &[f64], ok: &[bool]) {
    for o in outage {
        let _ = write!(out, ",{o}");
    }
    for s in ok {
        let _ = write!(out, ",{}", u8::from(*s));
    }
    out.push('\n');
}

/// Training metrics CSV: `#` metadata lines, then
/// `seed,episode,raw_reward,smoothed_reward,mean_system_qoe,successful_data_bits,outage_*,constraint_satisfied_*`.
pub fn render_metrics_csv(config: &ExperimentConfig, run: &TrainedRun) -> String {
    let mut out = metadata_header(config, run.kind, run.seed);
    out.push_str("seed,episode,raw_reward,smoothed_reward,mean_system_qoe,successful_data_bits");
    link_columns(&mut out, config.env.num_links);
    for r in &run.rows {
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            r.seed, r.episode, r.raw_reward, r.smoothed_reward, r.mean_system_qoe, r.successful_data_bits
        );
        link_values(&mut out, &r.outage, &r.constraint_satisfied);
    }
    out
}

/// Evaluation CSV: one row per evaluation episode,
/// `seed,episode,mean_reward,mean_system_qoe,successful_data_bits,outage_*,constraint_satisfied_*`.
pub fn render_eval_csv(config: &ExperimentConfig, kind: PolicyKind, seed: u64, eval: &[EpisodeSummary]) -> String {
    let mut out = metadata_header(config, kind, seed);
    out.push_str("seed,episode,mean_reward,mean_system_qoe,successful_data_bits");
    link_columns(&mut out, config.env.num_links);
    for (e, s) in eval.iter().enumerate() {
        let _ = write!(
            out,
            "{seed},{e},{},{},{}",
            s.mean_reward,
            s.mean_system_qoe,
            s.successful_data_bits()
        );
        link_values(&mut out, &s.final_outage, &s.constraint_satisfied);
    }
    out
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Write a finished run's metrics, evaluation, metadata and (for learners)
/// checkpoint into `out`. Returns the metrics CSV path.
pub fn write_run(config: &ExperimentConfig, run: &TrainedRun, out: &Path) -> Result<PathBuf> {
    let metrics = out.join(train_csv_name(run.kind, run.seed));
    write_file(&metrics, &render_metrics_csv(config, run))?;
    write_file(
        &out.join(eval_csv_name(run.kind, run.seed)),
        &render_eval_csv(config, run.kind, run.seed, &run.eval),
    )?;
    write_file(&out.join("run_metadata.toml"), &config.metadata())?;
    if let Some(agent) = run.policy.as_learner() {
        let path = out.join(format!("{}_seed{}.bin", run.kind, run.seed));
        agents::save_checkpoint(agent, &path, &config.env_hash())?;
    }
    Ok(metrics)
}

/// Train, evaluate and write all outputs for one agent and seed.
pub fn run_training(config: &ExperimentConfig, kind: PolicyKind, seed: u64, out: &Path) -> Result<PathBuf> {
    let run = train(config, kind, seed)?;
    write_run(config, &run, out)
}

/// Evaluate a saved learner checkpoint on every configured seed and write
/// `eval_<kind>_seed<seed>.csv` files. Returns the written paths.
pub fn run_checkpoint_eval(config: &ExperimentConfig, checkpoint: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let (net, meta) = agents::load_checkpoint(checkpoint)?;
    let rule = match meta.kind {
        PolicyKind::Ddqn => TargetRule::Double,
        PolicyKind::Dqn => TargetRule::Standard,
        other => {
            return Err(Error::Format {
                path: checkpoint.to_path_buf(),
                message: format!("checkpoint holds a {other} agent, expected a learner"),
            })
        }
    };
    if meta.env_config_hash != config.env_hash() {
        log::warn!("checkpoint was trained under a different environment configuration");
    }
    if net.input_dim() != config.env.observation_dim() {
        return Err(Error::Shape(format!(
            "checkpoint expects {} observation features, environment produces {}",
            net.input_dim(),
            config.env.observation_dim()
        )));
    }
    let mut paths = Vec::new();
    for &seed in &config.experiment.seeds {
        let mut agent = DqnAgent::from_network(rule, net.clone(), config.agent.clone(), seed)?;
        let eval = evaluate(config, &mut agent, seed)?;
        let path = out.join(eval_csv_name(meta.kind, seed));
        write_file(&path, &render_eval_csv(config, meta.kind, seed, &eval))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Parsed numeric CSV: `#` metadata as key/value pairs, the header, and rows.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Read a CSV whose non-metadata cells are all numeric or agent names.
/// Non-numeric cells are stored as NaN; use [`read_text_column`] for them.
pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut metadata = Vec::new();
    let mut header = None;
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((k, v)) = meta.split_once('=') {
                metadata.push((k.trim().to_string(), v.trim().to_string()));
            }
        } else if header.is_none() {
            header = Some(line.split(',').map(str::to_string).collect::<Vec<_>>());
        } else if !line.is_empty() {
            rows.push(line.split(',').map(|c| c.parse().unwrap_or(f64::NAN)).collect());
        }
    }
    let header = header.ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        message: "no header row".into(),
    })?;
    Ok(CsvTable { metadata, header, rows })
}

pub fn read_text_column(path: &Path, name: &str) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let i = header.iter().position(|h| *h == name).ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        message: format!("no column `{name}`"),
    })?;
    Ok(lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').nth(i).unwrap_or_default().to_string())
        .collect())
}

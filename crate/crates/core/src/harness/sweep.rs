//! Payload sweep: every agent kind trained and evaluated at every payload for
//! every seed, aggregated into mean and standard deviation over seeds.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;

use super::config::{ExperimentConfig, ARTIFACT_VERSION};
use super::run::{self, read_csv, read_text_column, write_file};
use super::stats;
use crate::agents::PolicyKind;
use crate::error::{Error, Result};

/// Evaluation outcome of one (payload, agent, seed) job.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSample {
    pub payload_bits: f64,
    pub agent: PolicyKind,
    pub seed: u64,
    pub mean_qoe: f64,
    pub successful_data_bits: f64,
}

/// Aggregate over seeds for one (payload, agent) point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub payload_bits: f64,
    pub agent: PolicyKind,
    pub qoe_mean: f64,
    pub qoe_std: f64,
    pub data_mean: f64,
    pub data_std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub points: Vec<SweepPoint>,
}

impl SweepTable {
    pub fn from_samples(samples: &[SweepSample]) -> Self {
        let mut keys: Vec<(f64, PolicyKind)> = Vec::new();
        for s in samples {
            if !keys.iter().any(|&(p, a)| p == s.payload_bits && a == s.agent) {
                keys.push((s.payload_bits, s.agent));
            }
        }
        keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let points = keys
            .into_iter()
            .map(|(payload_bits, agent)| {
                let group: Vec<&SweepSample> = samples
                    .iter()
                    .filter(|s| s.payload_bits == payload_bits && s.agent == agent)
                    .collect();
                let qoe: Vec<f64> = group.iter().map(|s| s.mean_qoe).collect();
                let data: Vec<f64> = group.iter().map(|s| s.successful_data_bits).collect();
                SweepPoint {
                    payload_bits,
                    agent,
                    qoe_mean: stats::mean(&qoe),
                    qoe_std: stats::std_dev(&qoe),
                    data_mean: stats::mean(&data),
                    data_std: stats::std_dev(&data),
                    n: group.len(),
                }
            })
            .collect();
        Self { points }
    }

    /// Points of one agent in increasing payload order.
    pub fn series(&self, agent: PolicyKind) -> Vec<&SweepPoint> {
        self.points.iter().filter(|p| p.agent == agent).collect()
    }

    pub fn agents(&self) -> Vec<PolicyKind> {
        let mut a: Vec<PolicyKind> = self.points.iter().map(|p| p.agent).collect();
        a.sort();
        a.dedup();
        a
    }
}

/// Train and evaluate one sweep job.
pub fn sweep_job(config: &ExperimentConfig, payload: f64, agent: PolicyKind, seed: u64) -> Result<(SweepSample, run::TrainedRun)> {
    let cfg = config.with_payload(payload);
    let trained = run::train(&cfg, agent, seed)?;
    Ok((
        SweepSample {
            payload_bits: payload,
            agent,
            seed,
            mean_qoe: trained.eval_mean_qoe(),
            successful_data_bits: trained.eval_successful_data(),
        },
        trained,
    ))
}

/// Run the sweep over `payloads` with up to `jobs` worker threads. Training
/// outputs of every job go to `out/payload_<bits>/`; samples come back in
/// (payload, agent, seed) order regardless of scheduling.
pub fn payload_sweep(config: &ExperimentConfig, payloads: &[f64], out: Option<&Path>, jobs: usize) -> Result<Vec<SweepSample>> {
    config.validate()?;
    if payloads.len() < 3 {
        return Err(Error::config("payloads", "a sweep needs at least 3 payload points"));
    }
    if let Some(p) = payloads.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return Err(Error::config("payloads", format!("payload {p} is not positive")));
    }
    let mut tasks = Vec::new();
    for &payload in payloads {
        for &agent in &config.experiment.sweep_agents {
            for &seed in &config.experiment.seeds {
                tasks.push((payload, agent, seed));
            }
        }
    }
    let next = Mutex::new(0usize);
    let results: Mutex<Vec<Option<Result<SweepSample>>>> = Mutex::new((0..tasks.len()).map(|_| None).collect());
    let worker = || loop {
        let i = {
            let mut n = next.lock().expect("sweep queue poisoned");
            let i = *n;
            *n += 1;
            i
        };
        let Some(&(payload, agent, seed)) = tasks.get(i) else { break };
        log::info!("sweep: payload {payload} agent {agent} seed {seed}");
        let outcome = sweep_job(config, payload, agent, seed).and_then(|(sample, trained)| {
            if let Some(out) = out {
                let cfg = config.with_payload(payload);
                run::write_run(&cfg, &trained, &out.join(format!("payload_{payload}")))?;
            }
            Ok(sample)
        });
        results.lock().expect("sweep results poisoned")[i] = Some(outcome);
    };
    thread::scope(|s| {
        for _ in 0..jobs.max(1).min(tasks.len()) {
            s.spawn(worker);
        }
    });
    results
        .into_inner()
        .expect("sweep results poisoned")
        .into_iter()
        .map(|r| r.expect("every sweep job ran"))
        .collect()
}

pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_PER_SEED_CSV: &str = "sweep_per_seed.csv";

fn header(config: &ExperimentConfig) -> String {
    format!(
        "# artifact_version={ARTIFACT_VERSION}\n# config_hash={}\n# seeds={}\n",
        config.hash(),
        config
            .experiment
            .seeds
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(" ")
    )
}

/// `payload_bits,agent,qoe_mean,qoe_std,successful_data_mean,successful_data_std,n`
pub fn render_sweep_csv(config: &ExperimentConfig, table: &SweepTable) -> String {
    let mut out = header(config);
    out.push_str("payload_bits,agent,qoe_mean,qoe_std,successful_data_mean,successful_data_std,n\n");
    for p in &table.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.payload_bits, p.agent, p.qoe_mean, p.qoe_std, p.data_mean, p.data_std, p.n
        );
    }
    out
}

/// `payload_bits,agent,seed,mean_qoe,successful_data_bits`
pub fn render_per_seed_csv(config: &ExperimentConfig, samples: &[SweepSample]) -> String {
    let mut out = header(config);
    out.push_str("payload_bits,agent,seed,mean_qoe,successful_data_bits\n");
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.payload_bits, s.agent, s.seed, s.mean_qoe, s.successful_data_bits
        );
    }
    out
}

/// Run the sweep and write `sweep.csv`, `sweep_per_seed.csv` and the run
/// metadata into `out`. Returns the path of `sweep.csv`.
pub fn run_sweep(config: &ExperimentConfig, payloads: &[f64], out: &Path, jobs: usize) -> Result<PathBuf> {
    let samples = payload_sweep(config, payloads, Some(out), jobs)?;
    let table = SweepTable::from_samples(&samples);
    let path = out.join(SWEEP_CSV);
    write_file(&path, &render_sweep_csv(config, &table))?;
    write_file(&out.join(SWEEP_PER_SEED_CSV), &render_per_seed_csv(config, &samples))?;
    write_file(&out.join("run_metadata.toml"), &config.metadata())?;
    Ok(path)
}

/// Read back a `sweep.csv`.
pub fn read_sweep_csv(path: &Path) -> Result<SweepTable> {
    let table = read_csv(path)?;
    let agents = read_text_column(path, "agent")?;
    let col = |name: &str| {
        table.column(name).ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            message: format!("missing column `{name}`"),
        })
    };
    let (payload, qm, qs, dm, ds, n) = (
        col("payload_bits")?,
        col("qoe_mean")?,
        col("qoe_std")?,
        col("successful_data_mean")?,
        col("successful_data_std")?,
        col("n")?,
    );
    let points = agents
        .iter()
        .enumerate()
        .map(|(i, a)| {
            Ok(SweepPoint {
                payload_bits: payload[i],
                agent: a.parse().map_err(|_| Error::Format {
                    path: path.to_path_buf(),
                    message: format!("unknown agent `{a}` on data row {}", i + 1),
                })?,
                qoe_mean: qm[i],
                qoe_std: qs[i],
                data_mean: dm[i],
                data_std: ds[i],
                n: n[i] as usize,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { points })
}

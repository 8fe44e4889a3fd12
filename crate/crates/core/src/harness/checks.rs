//! Acceptance checks. Criteria 1 to 3 read the outputs of `train` and `sweep`
//! runs; criteria 4 to 8 are self-contained and run from scratch.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::config::ExperimentConfig;
use super::run::{self, read_csv};
use super::stats;
use super::sweep::{read_sweep_csv, SweepTable, SWEEP_CSV};
use crate::agents::stub::{overestimation_witness, WitnessSettings};
use crate::agents::{
    build_policy, double_q_target, greedy_actions, max_q_target, oracle_search, AgentConfig, GreedyInfo, Mode,
    PolicyKind, RandomPolicy, TargetRule,
};
use crate::channel::{self, ChannelParams, LinkGeometry};
use crate::env::{Env, EnvConfig};
use crate::error::{Error, Result};
use crate::neural::{Matrix, Mlp};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn new(id: u8, name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            id,
            name,
            passed,
            detail: detail.into(),
        }
    }

    fn from_result(id: u8, name: &'static str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(id, name, passed, detail),
            Err(e) => Self::new(id, name, false, format!("error: {e}")),
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{verdict}] criterion {} ({}): {}", self.id, self.name, self.detail)
    }
}

/// Raw and smoothed per-episode reward of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTrace {
    pub seed: u64,
    pub raw: Vec<f64>,
    pub smoothed: Vec<f64>,
}

impl RewardTrace {
    pub fn from_rows(seed: u64, rows: &[run::MetricsRow]) -> Self {
        Self {
            seed,
            raw: rows.iter().map(|r| r.raw_reward).collect(),
            smoothed: rows.iter().map(|r| r.smoothed_reward).collect(),
        }
    }

    fn tail_len(&self) -> usize {
        (self.raw.len() / 10).max(1)
    }

    /// Mean smoothed reward over the final 10% of episodes.
    pub fn final_smoothed(&self) -> f64 {
        stats::mean(&self.smoothed[self.smoothed.len() - self.tail_len()..])
    }

    /// Mean smoothed reward over the first 10% of episodes.
    pub fn initial_smoothed(&self) -> f64 {
        stats::mean(&self.smoothed[..self.tail_len()])
    }

    /// Standard deviation of the raw reward over the final 10% of episodes.
    pub fn final_fluctuation(&self) -> f64 {
        stats::std_dev(&self.raw[self.raw.len() - self.tail_len()..])
    }
}

pub type RewardTraces = BTreeMap<PolicyKind, Vec<RewardTrace>>;

/// Collect every `train_<kind>_seed<n>.csv` in `dir`.
pub fn load_reward_traces(dir: &Path) -> Result<RewardTraces> {
    let mut traces = RewardTraces::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<_> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for path in paths {
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let Some(rest) = name.strip_prefix("train_").and_then(|r| r.strip_suffix(".csv")) else { continue };
        let Some((kind, seed)) = rest.split_once("_seed") else { continue };
        let (Ok(kind), Ok(seed)) = (kind.parse::<PolicyKind>(), seed.parse::<u64>()) else { continue };
        let table = read_csv(&path)?;
        let missing = |c: &str| Error::Format {
            path: path.clone(),
            message: format!("missing column `{c}`"),
        };
        traces.entry(kind).or_default().push(RewardTrace {
            seed,
            raw: table.column("raw_reward").ok_or_else(|| missing("raw_reward"))?,
            smoothed: table.column("smoothed_reward").ok_or_else(|| missing("smoothed_reward"))?,
        });
    }
    Ok(traces)
}

/// Seeds required by the ordering check and the number of them that must
/// agree on the pairwise DDQN versus DQN comparisons.
pub const ORDERING_MIN_SEEDS: usize = 5;
pub const ORDERING_MIN_AGREEING: f64 = 0.8;

/// Criterion 1: reward ordering across seeds.
pub fn check_reward_ordering(traces: &RewardTraces) -> CheckResult {
    const NAME: &str = "reward ordering";
    let get = |k| traces.get(&k).map(Vec::as_slice).unwrap_or_default();
    let (ddqn, dqn, greedy, random) = (
        get(PolicyKind::Ddqn),
        get(PolicyKind::Dqn),
        get(PolicyKind::Greedy),
        get(PolicyKind::Random),
    );
    for (kind, t) in [("ddqn", ddqn), ("dqn", dqn), ("greedy", greedy), ("random", random)] {
        if t.len() < ORDERING_MIN_SEEDS {
            return CheckResult::new(
                1,
                NAME,
                false,
                format!("{kind} has {} training runs, need {ORDERING_MIN_SEEDS}", t.len()),
            );
        }
    }
    let med = |t: &[RewardTrace]| stats::median(&t.iter().map(RewardTrace::final_smoothed).collect::<Vec<_>>());
    let (m_ddqn, m_dqn, m_greedy, m_random) = (med(ddqn), med(dqn), med(greedy), med(random));
    let ordered = m_ddqn > m_greedy && m_greedy > m_random;
    let mut paired = 0usize;
    let mut better = 0usize;
    let mut calmer = 0usize;
    for a in ddqn {
        if let Some(b) = dqn.iter().find(|b| b.seed == a.seed) {
            paired += 1;
            better += usize::from(a.final_smoothed() >= b.final_smoothed());
            calmer += usize::from(a.final_fluctuation() <= b.final_fluctuation());
        }
    }
    let need = (ORDERING_MIN_AGREEING * paired as f64).ceil() as usize;
    let passed = ordered && paired >= ORDERING_MIN_SEEDS && better >= need && calmer >= need;
    CheckResult::new(
        1,
        NAME,
        passed,
        format!(
            "median final reward ddqn {m_ddqn:.4} dqn {m_dqn:.4} greedy {m_greedy:.4} random {m_random:.4}; \
             ddqn>=dqn in {better}/{paired} seeds, ddqn std<=dqn std in {calmer}/{paired} (need {need})"
        ),
    )
}

pub const QOE_SPEARMAN_MIN: f64 = 0.8;

/// Criterion 2: DDQN QoE rises with payload and dominates greedy and random.
pub fn check_qoe_trend(table: &SweepTable) -> CheckResult {
    const NAME: &str = "qoe trend";
    let ddqn = table.series(PolicyKind::Ddqn);
    if ddqn.len() < 3 {
        return CheckResult::new(2, NAME, false, format!("ddqn has {} sweep points, need 3", ddqn.len()));
    }
    let payloads: Vec<f64> = ddqn.iter().map(|p| p.payload_bits).collect();
    let qoe: Vec<f64> = ddqn.iter().map(|p| p.qoe_mean).collect();
    let rho = stats::spearman(&payloads, &qoe);
    let mut dominated = Vec::new();
    for other in [PolicyKind::Greedy, PolicyKind::Random] {
        let series = table.series(other);
        for p in &ddqn {
            match series.iter().find(|q| q.payload_bits == p.payload_bits) {
                Some(q) if p.qoe_mean > q.qoe_mean => {}
                Some(_) => dominated.push(format!("{other}@{}", p.payload_bits)),
                None => dominated.push(format!("{other}@{} missing", p.payload_bits)),
            }
        }
    }
    let passed = rho > QOE_SPEARMAN_MIN && dominated.is_empty();
    let qoe_text: Vec<String> = qoe.iter().map(|q| format!("{q:.4}")).collect();
    CheckResult::new(
        2,
        NAME,
        passed,
        format!(
            "ddqn qoe [{}], spearman {rho:.3} (need > {QOE_SPEARMAN_MIN}); not dominated at: [{}]",
            qoe_text.join(", "),
            dominated.join(", ")
        ),
    )
}

/// Criterion 3: greedy and random deliver no constraint-compliant data, and
/// DDQN's successful-data curve peaks strictly inside the sweep.
pub fn check_successful_data(table: &SweepTable) -> CheckResult {
    const NAME: &str = "successful data";
    let mut nonzero = Vec::new();
    for other in [PolicyKind::Greedy, PolicyKind::Random] {
        let series = table.series(other);
        if series.is_empty() {
            nonzero.push(format!("{other} missing"));
        }
        for p in series {
            if p.data_mean != 0.0 {
                nonzero.push(format!("{other}@{}={}", p.payload_bits, p.data_mean));
            }
        }
    }
    let ddqn = table.series(PolicyKind::Ddqn);
    if ddqn.len() < 3 {
        return CheckResult::new(3, NAME, false, format!("ddqn has {} sweep points, need 3", ddqn.len()));
    }
    let data: Vec<f64> = ddqn.iter().map(|p| p.data_mean).collect();
    let peak = (0..data.len()).fold(0, |best, i| if data[i] > data[best] { i } else { best });
    let interior = peak > 0 && peak + 1 < data.len() && data[peak] > data[0] && data[peak] > data[data.len() - 1];
    let passed = interior && nonzero.is_empty();
    let data_text: Vec<String> = data.iter().map(|d| format!("{d:.0}")).collect();
    CheckResult::new(
        3,
        NAME,
        passed,
        format!(
            "ddqn bits [{}], peak at {} bits ({}); greedy/random nonzero: [{}]",
            data_text.join(", "),
            ddqn[peak].payload_bits,
            if interior { "interior" } else { "endpoint" },
            nonzero.join(", ")
        ),
    )
}

/// Criteria 1 to 3 from the outputs in `dir`: training CSVs for criterion 1
/// and `sweep.csv` for criteria 2 and 3.
pub fn summary(dir: &Path) -> Vec<CheckResult> {
    let c1 = match load_reward_traces(dir) {
        Ok(t) => check_reward_ordering(&t),
        Err(e) => CheckResult::new(1, "reward ordering", false, format!("error: {e}")),
    };
    let sweep_path = dir.join(SWEEP_CSV);
    let (c2, c3) = match read_sweep_csv(&sweep_path) {
        Ok(t) => (check_qoe_trend(&t), check_successful_data(&t)),
        Err(e) => (
            CheckResult::new(2, "qoe trend", false, format!("error: {e}")),
            CheckResult::new(3, "successful data", false, format!("error: {e}")),
        ),
    };
    vec![c1, c2, c3]
}

pub const OUTAGE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageCase {
    /// W
    pub power: f64,
    pub mean_gain: f64,
    /// bits
    pub payload: f64,
    /// s
    pub window: f64,
}

/// Random (power, payload, window) triples over the default link budget, with
/// link distances spread so the outage probabilities span (0, 1).
pub fn outage_cases(count: usize, seed: u64) -> Result<Vec<OutageCase>> {
    let params = ChannelParams::default();
    let mut rng = stream(seed, &[0x0c7a]);
    (0..count)
        .map(|_| {
            let distance = rng.random_range(300.0..2500.0);
            Ok(OutageCase {
                power: channel::dbm_to_watts(rng.random_range(5.0..23.0)),
                mean_gain: channel::db_to_linear(-channel::path_loss_db(distance, &params)?),
                payload: rng.random_range(5_000.0..80_000.0),
                window: rng.random_range(5e-3..50e-3),
            })
        })
        .collect()
}

/// Fraction of `draws` Rayleigh realizations on which the interference-free
/// link fails to deliver the payload within the window.
pub fn empirical_outage(case: &OutageCase, params: &ChannelParams, draws: usize, seed: u64) -> Result<f64> {
    let mut rng = stream(seed, &[0x0c7b]);
    let mut failures = 0usize;
    for _ in 0..draws {
        let h: f64 = Exp1.sample(&mut rng);
        let snr = case.power * case.mean_gain * h / params.noise_power;
        if channel::rate_bps(snr, params.subchannel_bandwidth)? * case.window < case.payload {
            failures += 1;
        }
    }
    Ok(failures as f64 / draws as f64)
}

/// Criterion 4.
pub fn check_outage_oracle(cases: usize, draws: usize, seed: u64) -> CheckResult {
    let r = (|| {
        let params = ChannelParams::default();
        let mut worst = 0.0f64;
        let mut lines = Vec::new();
        for (i, case) in outage_cases(cases, seed)?.iter().enumerate() {
            let analytic = channel::analytic_outage(case.power, case.mean_gain, &params, case.payload, case.window)?;
            let empirical = empirical_outage(case, &params, draws, seed.wrapping_add(i as u64))?;
            worst = worst.max((analytic - empirical).abs());
            lines.push(format!("{analytic:.4}/{empirical:.4}"));
        }
        Ok((
            worst <= OUTAGE_TOLERANCE,
            format!(
                "{cases} cases x {draws} draws, max |analytic-empirical| {worst:.2e} (tol {OUTAGE_TOLERANCE:.0e}); analytic/empirical [{}]",
                lines.join(" ")
            ),
        ))
    })();
    CheckResult::from_result(4, "outage oracle", r)
}

pub const GRADIENT_TOLERANCE: f64 = 1e-4;

/// Largest relative error between backpropagated and central-difference
/// gradients of `0.5 * mean_batch ||f(x) - t||^2` over every parameter.
pub fn gradient_check_error(net: &Mlp, x: &Matrix, targets: &Matrix) -> Result<f64> {
    let n = x.rows() as f64;
    let loss = |net: &Mlp| -> Result<f64> {
        let y = net.forward_batch(x)?;
        Ok(0.5 * y.as_slice().iter().zip(targets.as_slice()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n)
    };
    let y = net.forward_batch(x)?;
    let out_grads = Matrix::from_vec(
        y.rows(),
        y.cols(),
        y.as_slice().iter().zip(targets.as_slice()).map(|(a, b)| a - b).collect(),
    )?;
    // backward averages over the batch, matching the mean in `loss`
    let analytic = net.backward(x, &out_grads)?;
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for i in 0..net.num_params() {
        let theta = net.params()[i];
        let h = 1e-5 * theta.abs().max(1.0);
        probe.params_mut()[i] = theta + h;
        let up = loss(&probe)?;
        probe.params_mut()[i] = theta - h;
        let down = loss(&probe)?;
        probe.params_mut()[i] = theta;
        let numeric = (up - down) / (2.0 * h);
        let scale = analytic[i].abs().max(numeric.abs());
        // both vanish: nothing to compare beyond absolute agreement
        let err = if scale < 1e-9 { (analytic[i] - numeric).abs() } else { (analytic[i] - numeric).abs() / scale };
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Criterion 5: `batches` random batches on a small ReLU network.
pub fn check_gradients(batches: usize, seed: u64) -> CheckResult {
    let r = (|| {
        let dims = [8, 24, 16, 6];
        let mut worst = 0.0f64;
        let mut rng = stream(seed, &[0x96ad]);
        for b in 0..batches {
            let net = Mlp::new(&dims, seed.wrapping_add(b as u64))?;
            let rows = 4;
            let x = Matrix::from_vec(rows, dims[0], (0..rows * dims[0]).map(|_| rng.random_range(-2.0..2.0)).collect())?;
            let t = Matrix::from_vec(rows, dims[3], (0..rows * dims[3]).map(|_| rng.random_range(-1.0..1.0)).collect())?;
            worst = worst.max(gradient_check_error(&net, &x, &t)?);
        }
        Ok((
            worst < GRADIENT_TOLERANCE,
            format!("{batches} batches, max relative error {worst:.2e} (tol {GRADIENT_TOLERANCE:.0e})"),
        ))
    })();
    CheckResult::from_result(5, "gradient correctness", r)
}

/// Criterion 6: the pinned target case and the overestimation witness.
pub fn check_target_decoupling(witness_seeds: usize, settings: &WitnessSettings) -> CheckResult {
    let r = (|| {
        let ddqn = double_q_target(1.0, false, &[1.0, 3.0, 2.0], &[0.5, 0.2, 0.7], 0.9);
        let dqn = max_q_target(1.0, false, &[0.5, 0.2, 0.7], 0.9);
        let pinned = ddqn == 1.18 && dqn == 1.63;
        let mut q_ddqn = Vec::new();
        let mut q_dqn = Vec::new();
        for s in 0..witness_seeds as u64 {
            q_ddqn.push(overestimation_witness(TargetRule::Double, settings, s)?);
            q_dqn.push(overestimation_witness(TargetRule::Standard, settings, s)?);
        }
        let (m_ddqn, m_dqn) = (stats::mean(&q_ddqn), stats::mean(&q_dqn));
        let wins = q_dqn.iter().zip(&q_ddqn).filter(|(a, b)| a > b).count();
        Ok((
            pinned && witness_seeds >= 10 && m_dqn > m_ddqn,
            format!(
                "ddqn target {ddqn} dqn target {dqn}; witness over {witness_seeds} seeds: mean max-Q dqn {m_dqn:.4} ddqn {m_ddqn:.4} (dqn higher in {wins})"
            ),
        ))
    })();
    CheckResult::from_result(6, "target decoupling", r)
}

fn small_config(num_links: usize, num_subchannels: usize, frozen: bool) -> EnvConfig {
    let mut cfg = EnvConfig {
        num_links,
        frozen_channel: frozen,
        penalty_weight: 0.0,
        ..EnvConfig::default()
    };
    cfg.channel.num_subchannels = num_subchannels;
    cfg.geometry = LinkGeometry::uniform(num_links, 2000.0, 200.0, 0.2);
    cfg
}

/// Criterion 7 on `snapshots` frozen realizations each.
pub fn check_oracle_equivalence(snapshots: usize, seed: u64) -> CheckResult {
    let r = (|| {
        let mut violations = 0usize;
        let mut compared = 0usize;
        let two = small_config(2, 2, true);
        let mut env = Env::new(two.clone())?;
        let agent = AgentConfig::default();
        let mut rng_policy = RandomPolicy::new(seed);
        for s in 0..snapshots as u64 {
            let obs = env.reset(seed.wrapping_add(s))?;
            let best = env.evaluate(&oracle_search(&env)?)?.reward;
            let mut candidates = vec![
                greedy_actions(&env, GreedyInfo::Prev)?,
                greedy_actions(&env, GreedyInfo::Frozen)?,
            ];
            for kind in [PolicyKind::Ddqn, PolicyKind::Dqn] {
                let mut p = build_policy(kind, &env, &agent, seed.wrapping_add(s), 1)?;
                candidates.push(p.act(&env, &obs, Mode::Eval)?);
            }
            let per = env.space().per_link_size();
            candidates.extend((0..50).map(|_| rng_policy.sample(2, per)));
            for a in &candidates {
                compared += 1;
                if env.evaluate(a)?.reward > best {
                    violations += 1;
                }
            }
        }
        let mut env1 = Env::new(small_config(1, 4, true))?;
        let mut mismatches = 0usize;
        for s in 0..snapshots as u64 {
            env1.reset(seed.wrapping_add(1000 + s))?;
            if greedy_actions(&env1, GreedyInfo::Frozen)? != oracle_search(&env1)? {
                mismatches += 1;
            }
        }
        Ok((
            violations == 0 && mismatches == 0,
            format!(
                "K=2 C=2: {violations}/{compared} policy actions beat the oracle; K=1: greedy differs from oracle on {mismatches}/{snapshots} snapshots"
            ),
        ))
    })();
    CheckResult::from_result(7, "oracle equivalence", r)
}

/// Criterion 8: two trainings with the same config and seed write identical
/// metrics files.
pub fn check_determinism(config: &ExperimentConfig, kind: PolicyKind, seed: u64, scratch: &Path) -> CheckResult {
    let r = (|| {
        let a = run::run_training(config, kind, seed, &scratch.join("a"))?;
        let b = run::run_training(config, kind, seed, &scratch.join("b"))?;
        let bytes_a = fs::read(&a).map_err(|e| Error::io(&a, e))?;
        let bytes_b = fs::read(&b).map_err(|e| Error::io(&b, e))?;
        Ok((
            bytes_a == bytes_b,
            format!(
                "{kind} seed {seed}, {} episodes: metrics files {} ({} bytes)",
                config.experiment.episodes,
                if bytes_a == bytes_b { "identical" } else { "differ" },
                bytes_a.len()
            ),
        ))
    })();
    CheckResult::from_result(8, "determinism", r)
}

/// Configuration used by the determinism self-check: defaults at a reduced
/// episode count, long enough for gradient steps and target syncs to occur.
pub fn determinism_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.experiment.episodes = 30;
    c.experiment.eval_episodes = 2;
    c.experiment.smoothing_window = 10;
    c
}

/// Criteria 4 to 8 at their acceptance settings. `scratch` receives the
/// determinism runs.
pub fn selftest(scratch: &Path) -> Vec<CheckResult> {
    vec![
        check_outage_oracle(10, 1_000_000, 4),
        check_gradients(10, 5),
        check_target_decoupling(10, &WitnessSettings::default()),
        check_oracle_equivalence(20, 7),
        check_determinism(&determinism_config(), PolicyKind::Ddqn, 8, scratch),
    ]
}

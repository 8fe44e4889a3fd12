use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use genv2v_core::harness::{self, checks, ExperimentConfig};
use genv2v_core::{CheckResult, Error, GreedyInfo, PolicyKind};

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_CHECK: u8 = 3;

/// Resource allocation simulator for generative-AI-assisted V2V links.
#[derive(Parser)]
#[command(name = "genv2v", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and write per-episode metrics, evaluation and checkpoint.
    Train {
        /// TOML config; defaults apply to every missing key.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        agent: PolicyKind,
        /// Seed to run; all seeds of the config when omitted.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Channel knowledge of the greedy baseline.
        #[arg(long)]
        greedy_info: Option<GreedyInfo>,
    },
    /// Evaluate a saved learner checkpoint on every seed of the config.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate every sweep agent at every payload.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated payloads in bits; the config's sweep when omitted.
        #[arg(long, value_delimiter = ',')]
        payloads: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; all available cores when omitted.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        greedy_info: Option<GreedyInfo>,
    },
    /// Check the reward-ordering and sweep criteria against outputs in a directory.
    Summary {
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the outage, gradient, target, oracle and determinism checks.
    Selftest,
}

fn load(config: Option<&Path>, greedy_info: Option<GreedyInfo>) -> Result<ExperimentConfig, Error> {
    let mut c = match config {
        Some(path) => harness::parse_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(g) = greedy_info {
        c.agent.greedy_info = g;
    }
    c.validate()?;
    Ok(c)
}

fn report(results: &[CheckResult]) -> ExitCode {
    for r in results {
        println!("{r}");
    }
    if results.iter().all(|r| r.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK)
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Train {
            config,
            agent,
            seed,
            out,
            greedy_info,
        } => {
            let c = load(config.as_deref(), greedy_info)?;
            if agent == PolicyKind::Oracle {
                return Err(Error::Config {
                    field: "agent".into(),
                    message: "the oracle is a verification tool, not a trainable agent".into(),
                });
            }
            let seeds = seed.map_or_else(|| c.experiment.seeds.clone(), |s| vec![s]);
            for s in seeds {
                let path = harness::run_training(&c, agent, s, &out)?;
                println!("{}", path.display());
            }
        }
        Command::Eval { checkpoint, config, out } => {
            let c = load(config.as_deref(), None)?;
            for path in harness::run_checkpoint_eval(&c, &checkpoint, &out)? {
                println!("{}", path.display());
            }
        }
        Command::Sweep {
            config,
            payloads,
            out,
            jobs,
            greedy_info,
        } => {
            let c = load(config.as_deref(), greedy_info)?;
            let payloads = payloads.unwrap_or_else(|| c.experiment.payload_sweep.clone());
            let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let path = harness::run_sweep(&c, &payloads, &out, jobs)?;
            println!("{}", path.display());
        }
        Command::Summary { out } => return Ok(report(&checks::summary(&out))),
        Command::Selftest => {
            let scratch = tempfile::tempdir().map_err(|e| Error::Io {
                path: std::env::temp_dir(),
                source: e,
            })?;
            return Ok(report(&checks::selftest(scratch.path())));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { EXIT_CONFIG } else { EXIT_RUNTIME })
        }
    }
}

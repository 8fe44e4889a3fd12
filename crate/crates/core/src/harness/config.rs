//! Experiment configuration: one TOML file with `[experiment]`, `[agent]` and
//! `[env]` sections (the latter with `channel`, `geometry`, `content`, `qoe`
//! and `normalization` sub-tables). Every key is optional; unknown keys are
//! rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{AgentConfig, PolicyKind};
use crate::env::EnvConfig;
use crate::error::{Error, Result};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSettings {
    pub episodes: usize,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub smoothing_window: usize,
    /// bits
    pub payload_sweep: Vec<f64>,
    /// Agent kinds run by `sweep`.
    pub sweep_agents: Vec<PolicyKind>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            episodes: 3000,
            eval_episodes: 20,
            seeds: vec![1, 2, 3, 4, 5],
            smoothing_window: 100,
            payload_sweep: vec![5_000.0, 10_000.0, 20_000.0, 40_000.0, 80_000.0],
            sweep_agents: vec![
                PolicyKind::Ddqn,
                PolicyKind::Dqn,
                PolicyKind::Greedy,
                PolicyKind::Random,
            ],
            output_dir: PathBuf::from("runs"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSettings,
    pub agent: AgentConfig,
    pub env: EnvConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let x = &self.experiment;
        if x.episodes == 0 {
            return Err(Error::config("experiment.episodes", "must be at least 1"));
        }
        if x.smoothing_window == 0 {
            return Err(Error::config("experiment.smoothing_window", "must be at least 1"));
        }
        if x.seeds.is_empty() {
            return Err(Error::config("experiment.seeds", "must not be empty"));
        }
        let mut sorted = x.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("experiment.seeds", "seeds must be distinct"));
        }
        if x.payload_sweep.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::config("experiment.payload_sweep", "payloads must be positive"));
        }
        if x.sweep_agents.contains(&PolicyKind::Oracle) {
            return Err(Error::config(
                "experiment.sweep_agents",
                "the exhaustive oracle cannot be swept at experiment scale",
            ));
        }
        self.agent.validate()?;
        self.env.validate()
    }

    /// Canonical TOML rendering of the effective configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always serializable")
    }

    /// SHA-256 over the canonical TOML rendering, hex encoded.
    pub fn hash(&self) -> String {
        hex_digest(self.to_toml().as_bytes())
    }

    pub fn env_hash(&self) -> String {
        hex_digest(toml::to_string(&self.env).expect("serializable").as_bytes())
    }

    /// Copy with the environment's payload set to `bits`.
    pub fn with_payload(&self, bits: f64) -> Self {
        let mut c = self.clone();
        c.env.content = c.env.content.with_payload(bits);
        c
    }

    /// Run metadata: version, hashes and the full effective configuration.
    pub fn metadata(&self) -> String {
        format!(
            "# genv2v run metadata\n# artifact_version = {ARTIFACT_VERSION}\n# config_hash = {}\n# env_config_hash = {}\n\n{}",
            self.hash(),
            self.env_hash(),
            self.to_toml()
        )
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse_config_str(text: &str, origin: &Path) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

/// Read and validate a configuration file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, path)
}

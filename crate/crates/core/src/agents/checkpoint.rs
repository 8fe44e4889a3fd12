//! Agent checkpoints: the online network in the binary parameter format plus
//! a `key=value` text sidecar at `<path>.meta`.

use std::fs;
use std::path::{Path, PathBuf};

use super::{DqnAgent, Policy, PolicyKind};
use crate::error::{Error, Result};
use crate::neural::Mlp;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub kind: PolicyKind,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_horizon: u64,
    pub env_config_hash: String,
}

impl CheckpointMeta {
    fn render(&self) -> String {
        format!(
            "agent_kind={}\ngamma={}\nepsilon_start={}\nepsilon_end={}\nepsilon_horizon={}\nenv_config_hash={}\n",
            self.kind,
            self.gamma,
            self.epsilon_start,
            self.epsilon_end,
            self.epsilon_horizon,
            self.env_config_hash
        )
    }

    fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |message: String| Error::Format {
            path: path.to_path_buf(),
            message,
        };
        let get = |key: &str| -> Result<String> {
            text.lines()
                .filter_map(|l| l.split_once('='))
                .find(|(k, _)| k.trim() == key)
                .map(|(_, v)| v.trim().to_string())
                .ok_or_else(|| bad(format!("missing key `{key}`")))
        };
        let num = |key: &str, v: String| -> Result<f64> {
            v.parse().map_err(|_| Error::Format {
                path: path.to_path_buf(),
                message: format!("`{key}` is not a number: {v}"),
            })
        };
        let kind = get("agent_kind")?.parse()?;
        let gamma = num("gamma", get("gamma")?)?;
        let epsilon_start = num("epsilon_start", get("epsilon_start")?)?;
        let epsilon_end = num("epsilon_end", get("epsilon_end")?)?;
        let epsilon_horizon = num("epsilon_horizon", get("epsilon_horizon")?)? as u64;
        let env_config_hash = get("env_config_hash")?;
        Ok(Self {
            kind,
            gamma,
            epsilon_start,
            epsilon_end,
            epsilon_horizon,
            env_config_hash,
        })
    }
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

pub fn save_checkpoint(agent: &DqnAgent, path: &Path, env_config_hash: &str) -> Result<()> {
    agent.online().save(path)?;
    let s = agent.schedule();
    let meta = CheckpointMeta {
        kind: agent.kind(),
        gamma: agent.config().gamma,
        epsilon_start: s.start,
        epsilon_end: s.end,
        epsilon_horizon: s.horizon,
        env_config_hash: env_config_hash.to_string(),
    };
    let mp = meta_path(path);
    fs::write(&mp, meta.render()).map_err(|e| Error::io(mp, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(Mlp, CheckpointMeta)> {
    let net = Mlp::load(path)?;
    let mp = meta_path(path);
    let text = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    Ok((net, CheckpointMeta::parse(&text, &mp)?))
}

//! Policies over the environment. Every policy picks one flat action id per
//! link through the same [`Policy`] interface, so the harness is agnostic to
//! which one it drives.

mod baselines;
mod checkpoint;
mod dqn;
mod oracle;
pub mod stub;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use baselines::{greedy_actions, GreedyPolicy, RandomPolicy};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use dqn::{
    argmax, ddqn_targets, double_q_target, dqn_targets, max_q_target, select_action, AgentConfig,
    DqnAgent, EpsilonSchedule, TargetRule,
};
pub use oracle::{oracle_search, OraclePolicy, ORACLE_LIMIT};

use crate::env::{Env, Observation, StepResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Ddqn,
    Dqn,
    Greedy,
    Random,
    Oracle,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Ddqn,
        PolicyKind::Dqn,
        PolicyKind::Greedy,
        PolicyKind::Random,
        PolicyKind::Oracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Ddqn => "ddqn",
            PolicyKind::Dqn => "dqn",
            PolicyKind::Greedy => "greedy",
            PolicyKind::Random => "random",
            PolicyKind::Oracle => "oracle",
        }
    }

    pub fn is_learner(self) -> bool {
        matches!(self, PolicyKind::Ddqn | PolicyKind::Dqn)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::config("agent", format!("unknown agent kind `{s}`")))
    }
}

/// Channel knowledge available to the greedy baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GreedyInfo {
    /// Own-link gains of the previous slot.
    #[default]
    Prev,
    /// Own-link gains of the slot being played.
    Frozen,
}

impl FromStr for GreedyInfo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prev" => Ok(GreedyInfo::Prev),
            "frozen" => Ok(GreedyInfo::Frozen),
            _ => Err(Error::config("greedy_info", format!("expected prev or frozen, got `{s}`"))),
        }
    }
}

/// Whether a policy may explore and learn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

pub trait Policy: Send {
    fn kind(&self) -> PolicyKind;

    /// One action id per link for the slot about to be played.
    fn act(&mut self, env: &Env, obs: &[Observation], mode: Mode) -> Result<Vec<usize>>;

    /// Feed back the outcome of the slot. Learners store per-link transitions
    /// and may run a gradient step, returning its loss.
    fn observe(
        &mut self,
        _obs: &[Observation],
        _actions: &[usize],
        _result: &StepResult,
    ) -> Result<Option<f64>> {
        Ok(None)
    }

    /// The learner, if this policy is one.
    fn as_learner(&self) -> Option<&DqnAgent> {
        None
    }
}

/// Construct a fresh policy of `kind` for `env`.
///
/// `total_train_slots` sets the exploration horizon of learners.
pub fn build_policy(
    kind: PolicyKind,
    env: &Env,
    config: &AgentConfig,
    seed: u64,
    total_train_slots: u64,
) -> Result<Box<dyn Policy>> {
    let space = env.space();
    Ok(match kind {
        PolicyKind::Ddqn | PolicyKind::Dqn => {
            let rule = if kind == PolicyKind::Ddqn {
                TargetRule::Double
            } else {
                TargetRule::Standard
            };
            Box::new(DqnAgent::new(
                rule,
                env.config().observation_dim(),
                space.per_link_size(),
                config.clone(),
                total_train_slots,
                seed,
            )?)
        }
        PolicyKind::Greedy => Box::new(GreedyPolicy::new(config.greedy_info)),
        PolicyKind::Random => Box::new(RandomPolicy::new(seed)),
        PolicyKind::Oracle => Box::new(OraclePolicy::new(env)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_round_trip_through_strings() {
        for k in PolicyKind::ALL {
            assert_eq!(k.to_string().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("sarsa".parse::<PolicyKind>().is_err());
        assert_eq!("frozen".parse::<GreedyInfo>().unwrap(), GreedyInfo::Frozen);
    }
}

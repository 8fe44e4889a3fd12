use super::{Mode, Policy, PolicyKind};
use crate::env::{Env, Observation};
use crate::error::{Error, Result};

/// Largest joint action space the exhaustive search accepts.
pub const ORACLE_LIMIT: u128 = 100_000;

/// Joint action maximizing the one-step reward on the current realization,
/// found by enumerating every joint action. Joint ids are ordered with link 0
/// as the most significant digit; the lowest id wins ties.
pub fn oracle_search(env: &Env) -> Result<Vec<usize>> {
    let space = env.space();
    let size = space.joint_size();
    if size > ORACLE_LIMIT {
        return Err(Error::SearchTooLarge {
            size,
            limit: ORACLE_LIMIT,
        });
    }
    let per = space.per_link_size();
    let k = env.num_links();
    let mut actions = vec![0; k];
    let mut best = (actions.clone(), f64::NEG_INFINITY);
    for _ in 0..size {
        let reward = env.evaluate(&actions)?.reward;
        if reward > best.1 {
            best = (actions.clone(), reward);
        }
        // odometer increment, last link fastest
        for digit in actions.iter_mut().rev() {
            *digit += 1;
            if *digit < per {
                break;
            }
            *digit = 0;
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone)]
pub struct OraclePolicy;

impl OraclePolicy {
    pub fn new(env: &Env) -> Result<Self> {
        let size = env.space().joint_size();
        if size > ORACLE_LIMIT {
            return Err(Error::SearchTooLarge {
                size,
                limit: ORACLE_LIMIT,
            });
        }
        Ok(Self)
    }
}

impl Policy for OraclePolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Oracle
    }

    fn act(&mut self, env: &Env, _obs: &[Observation], _mode: Mode) -> Result<Vec<usize>> {
        oracle_search(env)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelParams, LinkGeometry};
    use crate::env::EnvConfig;

    #[test]
    fn single_action_space() {
        let cfg = EnvConfig {
            num_links: 1,
            power_levels: vec![0.1],
            diffusion_levels: vec![10],
            channel: ChannelParams { num_subchannels: 1, ..Default::default() },
            geometry: LinkGeometry::uniform(1, 300.0, 300.0, 0.5),
            ..Default::default()
        };
        let env = Env::new(cfg).unwrap();
        assert_eq!(oracle_search(&env).unwrap(), vec![0]);
    }

    #[test]
    fn refuses_large_spaces() {
        let env = Env::new(EnvConfig::default()).unwrap();
        assert!(matches!(oracle_search(&env), Err(Error::SearchTooLarge { .. })));
        assert!(OraclePolicy::new(&env).is_err());
    }
}

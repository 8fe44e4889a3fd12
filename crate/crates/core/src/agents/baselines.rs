use rand::Rng;

use super::{GreedyInfo, Mode, Policy, PolicyKind};
use crate::channel;
use crate::env::{Env, Observation};
use crate::error::Result;
use crate::qoe;
use crate::rng::{self, tag, StreamRng};

/// Per link, the action with the highest QoE predicted from own-link gains
/// alone: no interference, outage constraint ignored. Lowest id wins ties.
pub fn greedy_actions(env: &Env, info: GreedyInfo) -> Result<Vec<usize>> {
    let cfg = env.config();
    let space = env.space();
    let real = match info {
        GreedyInfo::Prev => env.previous_realization(),
        GreedyInfo::Frozen => env.realization(),
    };
    let profiles = (0..space.num_diffusion)
        .map(|d| env.content_profile(d))
        .collect::<Result<Vec<_>>>()?;
    (0..env.num_links())
        .map(|k| {
            let mut best = (0, f64::NEG_INFINITY);
            for id in 0..space.per_link_size() {
                let a = space.decode(id)?;
                let snr = cfg.power_levels[a.power] * real.gain(k, k, a.subchannel) / cfg.channel.noise_power;
                let rate = channel::rate_bps(snr, cfg.channel.subchannel_bandwidth)?;
                let p = &profiles[a.diffusion];
                let success = qoe::success_indicator(
                    rate,
                    p.payload_bits,
                    p.generation_time,
                    cfg.qoe.deadline,
                    env.coherence_times()[k],
                );
                let value = qoe::link_qoe(rate, p.delivered_similarity(), success, &cfg.qoe);
                if value > best.1 {
                    best = (id, value);
                }
            }
            Ok(best.0)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct GreedyPolicy {
    info: GreedyInfo,
}

impl GreedyPolicy {
    pub fn new(info: GreedyInfo) -> Self {
        Self { info }
    }
}

impl Policy for GreedyPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Greedy
    }

    fn act(&mut self, env: &Env, _obs: &[Observation], _mode: Mode) -> Result<Vec<usize>> {
        greedy_actions(env, self.info)
    }
}

/// Uniform over every link's action space.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: StreamRng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: rng::stream(seed, &[tag::AGENT, tag::POLICY]),
        }
    }

    pub fn sample(&mut self, num_links: usize, per_link_size: usize) -> Vec<usize> {
        (0..num_links).map(|_| self.rng.random_range(0..per_link_size)).collect()
    }
}

impl Policy for RandomPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Random
    }

    fn act(&mut self, env: &Env, _obs: &[Observation], _mode: Mode) -> Result<Vec<usize>> {
        Ok(self.sample(env.num_links(), env.space().per_link_size()))
    }
}

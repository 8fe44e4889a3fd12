//! Small synthetic problems for checking learner behaviour in isolation.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{AgentConfig, DqnAgent, TargetRule};
use crate::env::Transition;
use crate::error::{Error, Result};
use crate::neural::AdamConfig;
use crate::rng::{self, tag, StreamRng};

/// One-hot states with uniformly random successors and zero-mean Gaussian
/// rewards: every true action value is exactly zero.
#[derive(Debug, Clone)]
pub struct NoisyZeroStub {
    pub num_states: usize,
    pub num_actions: usize,
    noise: Normal<f64>,
    rng: StreamRng,
}

impl NoisyZeroStub {
    pub fn new(num_states: usize, num_actions: usize, noise_std: f64, seed: u64) -> Result<Self> {
        Ok(Self {
            num_states,
            num_actions,
            noise: Normal::new(0.0, noise_std).map_err(|e| Error::Domain(e.to_string()))?,
            rng: rng::stream(seed, &[tag::ENV]),
        })
    }

    pub fn state(&self, s: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.num_states];
        v[s] = 1.0;
        v
    }

    /// A transition from a uniformly random state under a uniformly random action.
    pub fn sample(&mut self) -> Transition {
        let s = self.rng.random_range(0..self.num_states);
        let next = self.rng.random_range(0..self.num_states);
        Transition {
            obs: self.state(s),
            action: self.rng.random_range(0..self.num_actions),
            reward: self.noise.sample(&mut self.rng),
            next_obs: self.state(next),
            done: false,
        }
    }
}

/// Settings for [`overestimation_witness`].
#[derive(Debug, Clone)]
pub struct WitnessSettings {
    pub num_states: usize,
    pub num_actions: usize,
    pub noise_std: f64,
    pub gamma: f64,
    pub gradient_steps: usize,
    pub fresh_per_step: usize,
    /// Trailing gradient steps over which the max-Q estimate is averaged.
    pub measure_last: usize,
}

impl Default for WitnessSettings {
    fn default() -> Self {
        Self {
            num_states: 4,
            num_actions: 8,
            noise_std: 1.0,
            gamma: 0.9,
            gradient_steps: 3_000,
            fresh_per_step: 8,
            measure_last: 1_000,
        }
    }
}

/// Train a learner on [`NoisyZeroStub`] data and return its average estimate
/// of `max_a Q(s, a)` over states and the trailing training window. The true
/// value is zero, so a positive result measures overestimation.
pub fn overestimation_witness(rule: TargetRule, settings: &WitnessSettings, seed: u64) -> Result<f64> {
    let mut stub = NoisyZeroStub::new(settings.num_states, settings.num_actions, settings.noise_std, seed)?;
    let config = AgentConfig {
        gamma: settings.gamma,
        batch_size: 32,
        learning_starts: 256,
        replay_capacity: 512,
        target_sync_interval: 50,
        hidden_layers: vec![32],
        huber_delta: 10.0,
        optimizer: AdamConfig {
            learning_rate: 2e-3,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut agent = DqnAgent::new(rule, settings.num_states, settings.num_actions, config, 1, seed)?;
    for _ in 0..256 {
        agent.remember(stub.sample());
    }
    let states: Vec<Vec<f64>> = (0..settings.num_states).map(|s| stub.state(s)).collect();
    let mut total = 0.0;
    let mut count = 0usize;
    for step in 0..settings.gradient_steps {
        for _ in 0..settings.fresh_per_step {
            agent.remember(stub.sample());
        }
        agent.train_step()?;
        if step + settings.measure_last >= settings.gradient_steps {
            for s in &states {
                let q = agent.q_values(s)?;
                total += q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

//! Deep Q-learning with a target network. The double variant lets the online
//! network choose the next-state action and the target network score it; the
//! standard variant takes the target network's own maximum.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GreedyInfo, Mode, Policy, PolicyKind};
use crate::env::{Env, Observation, StepResult, Transition};
use crate::error::{Error, Result};
use crate::neural::{copy_parameters, huber_loss, Adam, AdamConfig, Matrix, Mlp, ReplayBuffer};
use crate::rng::{self, tag, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of all training slots over which epsilon decays linearly.
    pub epsilon_decay_fraction: f64,
    /// Gradient steps between hard target-network syncs.
    pub target_sync_interval: u64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Slots between gradient steps.
    pub train_interval: u64,
    /// Transitions stored before the first gradient step.
    pub learning_starts: usize,
    pub hidden_layers: Vec<usize>,
    pub huber_delta: f64,
    /// Multiplier applied to rewards before they enter the replay buffer.
    pub reward_scale: f64,
    pub optimizer: AdamConfig,
    pub greedy_info: GreedyInfo,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.6,
            target_sync_interval: 200,
            batch_size: 64,
            replay_capacity: 50_000,
            train_interval: 1,
            learning_starts: 1_000,
            hidden_layers: vec![64],
            huber_delta: 1.0,
            reward_scale: 0.1,
            optimizer: AdamConfig::default(),
            greedy_info: GreedyInfo::Prev,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("agent.gamma", format!("must lie in [0, 1), got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start)
            || !(0.0..=1.0).contains(&self.epsilon_end)
            || self.epsilon_end > self.epsilon_start
        {
            return Err(Error::config(
                "agent.epsilon_start",
                "need 0 <= epsilon_end <= epsilon_start <= 1",
            ));
        }
        if !(self.epsilon_decay_fraction > 0.0 && self.epsilon_decay_fraction <= 1.0) {
            return Err(Error::config("agent.epsilon_decay_fraction", "must lie in (0, 1]"));
        }
        if self.target_sync_interval == 0 {
            return Err(Error::config("agent.target_sync_interval", "must be at least 1"));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return Err(Error::config(
                "agent.batch_size",
                "must be positive and no larger than replay_capacity",
            ));
        }
        if self.train_interval == 0 {
            return Err(Error::config("agent.train_interval", "must be at least 1"));
        }
        if self.hidden_layers.iter().any(|&h| h == 0) {
            return Err(Error::config("agent.hidden_layers", "sizes must be positive"));
        }
        if !(self.huber_delta > 0.0) {
            return Err(Error::config("agent.huber_delta", "must be positive"));
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return Err(Error::config("agent.reward_scale", "must be positive"));
        }
        if !(self.optimizer.learning_rate > 0.0) {
            return Err(Error::config("agent.optimizer.learning_rate", "must be positive"));
        }
        Ok(())
    }
}

/// How the bootstrap value of the next state is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetRule {
    /// Online network selects, target network evaluates.
    Double,
    /// Target network selects and evaluates.
    Standard,
}

/// Linear decay from `start` to `end` over `horizon` steps, flat afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub horizon: u64,
}

impl EpsilonSchedule {
    pub fn value(&self, step: u64) -> f64 {
        if step >= self.horizon {
            return self.end;
        }
        let frac = step as f64 / self.horizon as f64;
        self.start + (self.end - self.start) * frac
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy choice over the network's Q-values for `obs`.
pub fn select_action<R: Rng + ?Sized>(net: &Mlp, obs: &[f64], epsilon: f64, rng: &mut R) -> Result<usize> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Domain(format!("epsilon must lie in [0, 1], got {epsilon}")));
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return Ok(rng.random_range(0..net.output_dim()));
    }
    Ok(argmax(&net.forward(obs)?))
}

/// `r + gamma * Q_target(s', argmax_a Q_online(s', a))`, or `r` at episode end.
pub fn double_q_target(reward: f64, done: bool, q_online_next: &[f64], q_target_next: &[f64], gamma: f64) -> f64 {
    if done {
        reward
    } else {
        reward + gamma * q_target_next[argmax(q_online_next)]
    }
}

/// `r + gamma * max_a Q_target(s', a)`, or `r` at episode end.
pub fn max_q_target(reward: f64, done: bool, q_target_next: &[f64], gamma: f64) -> f64 {
    if done {
        reward
    } else {
        reward + gamma * q_target_next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn next_state_matrix(batch: &[&Transition]) -> Result<Matrix> {
    Matrix::from_rows(&batch.iter().map(|t| t.next_obs.as_slice()).collect::<Vec<_>>())
}

pub fn ddqn_targets(batch: &[&Transition], online: &Mlp, target: &Mlp, gamma: f64) -> Result<Vec<f64>> {
    let next = next_state_matrix(batch)?;
    let q_online = online.forward_batch(&next)?;
    let q_target = target.forward_batch(&next)?;
    Ok(batch
        .iter()
        .enumerate()
        .map(|(i, t)| double_q_target(t.reward, t.done, q_online.row(i), q_target.row(i), gamma))
        .collect())
}

pub fn dqn_targets(batch: &[&Transition], target: &Mlp, gamma: f64) -> Result<Vec<f64>> {
    let next = next_state_matrix(batch)?;
    let q_target = target.forward_batch(&next)?;
    Ok(batch
        .iter()
        .enumerate()
        .map(|(i, t)| max_q_target(t.reward, t.done, q_target.row(i), gamma))
        .collect())
}

/// Q-learner shared by all links (parameter sharing): every link's
/// transitions feed one replay buffer and one network.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    rule: TargetRule,
    config: AgentConfig,
    online: Mlp,
    target: Mlp,
    optimizer: Adam,
    replay: ReplayBuffer,
    schedule: EpsilonSchedule,
    rng: StreamRng,
    slots_seen: u64,
    gradient_steps: u64,
}

impl DqnAgent {
    pub fn new(
        rule: TargetRule,
        obs_dim: usize,
        num_actions: usize,
        config: AgentConfig,
        total_train_slots: u64,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut dims = vec![obs_dim];
        dims.extend(&config.hidden_layers);
        dims.push(num_actions);
        let online = Mlp::new(&dims, rng::derive_seed(seed, &[tag::AGENT, tag::INIT]))?;
        let target = online.clone();
        let horizon = ((total_train_slots as f64 * config.epsilon_decay_fraction).round() as u64).max(1);
        Ok(Self {
            rule,
            schedule: EpsilonSchedule {
                start: config.epsilon_start,
                end: config.epsilon_end,
                horizon,
            },
            optimizer: Adam::new(config.optimizer.clone(), online.num_params()),
            replay: ReplayBuffer::new(config.replay_capacity),
            rng: rng::stream(seed, &[tag::AGENT, tag::POLICY]),
            online,
            target,
            config,
            slots_seen: 0,
            gradient_steps: 0,
        })
    }

    /// Rebuild an evaluation-only agent around trained parameters.
    pub fn from_network(rule: TargetRule, online: Mlp, config: AgentConfig, seed: u64) -> Result<Self> {
        let obs_dim = online.input_dim();
        let actions = online.output_dim();
        let mut agent = Self::new(rule, obs_dim, actions, AgentConfig {
            hidden_layers: online.dims()[1..online.dims().len() - 1].to_vec(),
            ..config
        }, 1, seed)?;
        agent.target = online.clone();
        agent.online = online;
        Ok(agent)
    }

    pub fn rule(&self) -> TargetRule {
        self.rule
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn schedule(&self) -> EpsilonSchedule {
        self.schedule
    }

    pub fn epsilon(&self) -> f64 {
        self.schedule.value(self.slots_seen)
    }

    pub fn gradient_steps(&self) -> u64 {
        self.gradient_steps
    }

    pub fn q_values(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.online.forward(obs)
    }

    /// Epsilon-greedy actions for a batch of observations.
    pub fn act_batch(&mut self, obs: &[&[f64]], epsilon: f64) -> Result<Vec<usize>> {
        let q = self.online.forward_batch(&Matrix::from_rows(obs)?)?;
        let n_actions = self.online.output_dim();
        Ok((0..obs.len())
            .map(|i| {
                if epsilon > 0.0 && self.rng.random::<f64>() < epsilon {
                    self.rng.random_range(0..n_actions)
                } else {
                    argmax(q.row(i))
                }
            })
            .collect())
    }

    pub fn remember(&mut self, mut t: Transition) {
        t.reward *= self.config.reward_scale;
        self.replay.push(t);
    }

    /// Bootstrap targets for `batch` under this agent's rule.
    pub fn targets(&self, batch: &[&Transition]) -> Result<Vec<f64>> {
        match self.rule {
            TargetRule::Double => ddqn_targets(batch, &self.online, &self.target, self.config.gamma),
            TargetRule::Standard => dqn_targets(batch, &self.target, self.config.gamma),
        }
    }

    /// One minibatch update. Returns `None` without touching anything while
    /// the replay buffer holds fewer than `max(batch_size, learning_starts)`
    /// transitions.
    pub fn train_step(&mut self) -> Result<Option<f64>> {
        let need = self.config.batch_size.max(self.config.learning_starts);
        if self.replay.len() < need {
            return Ok(None);
        }
        let batch = self.replay.sample(self.config.batch_size, &mut self.rng)?;
        let targets = self.targets(&batch)?;
        let states = Matrix::from_rows(&batch.iter().map(|t| t.obs.as_slice()).collect::<Vec<_>>())?;
        let cache = self.online.forward_cached(&states)?;
        let q = cache.output();
        let chosen: Vec<f64> = batch.iter().enumerate().map(|(i, t)| q.row(i)[t.action]).collect();
        let (loss, elem_grad) = huber_loss(&chosen, &targets, self.config.huber_delta)?;
        let mut out_grad = Matrix::zeros(q.rows(), q.cols());
        for (i, t) in batch.iter().enumerate() {
            out_grad.row_mut(i)[t.action] = elem_grad[i];
        }
        let grads = self.online.backward_from_cache(&cache, &out_grad)?;
        self.optimizer.step(&mut self.online, &grads)?;
        self.gradient_steps += 1;
        if self.gradient_steps % self.config.target_sync_interval == 0 {
            copy_parameters(&self.online, &mut self.target)?;
        }
        Ok(Some(loss))
    }
}

impl Policy for DqnAgent {
    fn kind(&self) -> PolicyKind {
        match self.rule {
            TargetRule::Double => PolicyKind::Ddqn,
            TargetRule::Standard => PolicyKind::Dqn,
        }
    }

    fn act(&mut self, _env: &Env, obs: &[Observation], mode: Mode) -> Result<Vec<usize>> {
        let epsilon = match mode {
            Mode::Train => self.epsilon(),
            Mode::Eval => 0.0,
        };
        let rows: Vec<&[f64]> = obs.iter().map(|o| &o[..]).collect();
        self.act_batch(&rows, epsilon)
    }

    fn observe(&mut self, obs: &[Observation], actions: &[usize], result: &StepResult) -> Result<Option<f64>> {
        for ((o, &a), next) in obs.iter().zip(actions).zip(&result.obs) {
            self.remember(Transition {
                obs: o.to_vec(),
                action: a,
                reward: result.reward,
                next_obs: next.to_vec(),
                done: result.done,
            });
        }
        self.slots_seen += 1;
        if self.slots_seen % self.config.train_interval == 0 {
            self.train_step()
        } else {
            Ok(None)
        }
    }

    fn as_learner(&self) -> Option<&DqnAgent> {
        Some(self)
    }
}

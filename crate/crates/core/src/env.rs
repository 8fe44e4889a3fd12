//! The resource-allocation MDP.
//!
//! Each slot every V2V link picks a sub-channel, a transmit power level and a
//! diffusion-step level. The environment computes SINR and rates on the chosen
//! sub-channels, checks timely delivery of each link's content package,
//! updates the windowed outage estimates and returns a shared reward: system
//! QoE minus a penalty proportional to how far each link's outage exceeds the
//! cap.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::channel::{
    self, coherence_time, linear_to_db, ChannelParams, ChannelRealization, FadingMode,
    LinkGeometry,
};
use crate::content::{self, ContentParams, ContentProfile};
use crate::error::{Error, Result};
use crate::qoe::{self, OutageTracker, QoeParams};
use crate::rng::{self, tag, StreamRng};

/// Affine normalisation constants for observation entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObsNormalization {
    /// Added to a gain in dB before scaling. The default equals the
    /// maximum-power SNR shift `10 log10(P_max / noise)`.
    pub gain_offset_db: f64,
    pub gain_scale_db: f64,
    /// Scale for interference-plus-noise measured in dB above the noise floor.
    pub interference_scale_db: f64,
    /// Payload divisor, bits. Defaults to the largest swept payload.
    pub payload_scale_bits: f64,
}

impl Default for ObsNormalization {
    fn default() -> Self {
        Self {
            gain_offset_db: 137.0,
            gain_scale_db: 10.0,
            interference_scale_db: 10.0,
            payload_scale_bits: 80_000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub num_links: usize,
    /// W, ascending
    pub power_levels: Vec<f64>,
    /// W
    pub power_budget: f64,
    /// Diffusion steps, ascending
    pub diffusion_levels: Vec<u32>,
    /// s
    pub slot_duration: f64,
    pub episode_length: usize,
    pub penalty_weight: f64,
    pub seed: u64,
    /// Test hook: fading distribution.
    pub fading: FadingMode,
    /// Test hook: keep the slot-0 realization for the whole episode.
    pub frozen_channel: bool,
    pub normalization: ObsNormalization,
    pub channel: ChannelParams,
    pub geometry: LinkGeometry,
    pub content: ContentParams,
    pub qoe: QoeParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            num_links: 3,
            power_levels: [5.0, 10.0, 15.0, 23.0].map(channel::dbm_to_watts).to_vec(),
            power_budget: channel::dbm_to_watts(23.0),
            diffusion_levels: vec![5, 10, 15, 20],
            slot_duration: 1e-3,
            episode_length: 100,
            penalty_weight: 10.0,
            seed: 0,
            fading: FadingMode::Rayleigh,
            frozen_channel: false,
            normalization: ObsNormalization::default(),
            channel: ChannelParams::default(),
            geometry: LinkGeometry::default(),
            content: ContentParams::default(),
            qoe: QoeParams::default(),
        }
    }
}

impl EnvConfig {
    pub fn num_subchannels(&self) -> usize {
        self.channel.num_subchannels
    }

    pub fn action_space(&self) -> ActionSpace {
        ActionSpace {
            num_links: self.num_links,
            num_subchannels: self.channel.num_subchannels,
            num_powers: self.power_levels.len(),
            num_diffusion: self.diffusion_levels.len(),
        }
    }

    /// Coherence time of every link.
    pub fn coherence_times(&self) -> Result<Vec<f64>> {
        self.geometry
            .speed
            .iter()
            .map(|&v| coherence_time(v, self.channel.carrier_freq, self.channel.max_coherence_time))
            .collect()
    }

    pub fn observation_dim(&self) -> usize {
        2 * self.num_subchannels() + 2 + self.action_space().per_link_size()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_links == 0 {
            return Err(Error::config("env.num_links", "must be at least 1"));
        }
        self.channel.validate()?;
        self.geometry.validate(self.num_links)?;
        self.content.validate()?;
        self.qoe.validate()?;
        if self.power_levels.is_empty() {
            return Err(Error::config("env.power_levels", "must not be empty"));
        }
        if self.power_levels.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::config("env.power_levels", "levels must be positive"));
        }
        if self.power_levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("env.power_levels", "levels must be strictly ascending"));
        }
        let max_power = *self.power_levels.last().unwrap();
        if max_power > self.power_budget {
            return Err(Error::config(
                "env.power_levels",
                format!(
                    "highest level {max_power} W exceeds the power budget {} W",
                    self.power_budget
                ),
            ));
        }
        if self.diffusion_levels.is_empty() {
            return Err(Error::config("env.diffusion_levels", "must not be empty"));
        }
        if self.diffusion_levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("env.diffusion_levels", "levels must be strictly ascending"));
        }
        if self.episode_length == 0 {
            return Err(Error::config("env.episode_length", "must be at least 1"));
        }
        if !(self.penalty_weight >= 0.0 && self.penalty_weight.is_finite()) {
            return Err(Error::config("env.penalty_weight", "must be non-negative"));
        }
        if !(self.slot_duration > 0.0) {
            return Err(Error::config("env.slot_duration", "must be positive"));
        }
        for (k, t) in self.coherence_times()?.into_iter().enumerate() {
            if self.slot_duration > t {
                return Err(Error::config(
                    "env.slot_duration",
                    format!(
                        "slot of {} s exceeds link {k}'s coherence time of {t:.6} s; \
                         block fading per slot requires slot_duration <= coherence time",
                        self.slot_duration
                    ),
                ));
            }
        }
        let n = &self.normalization;
        if !(n.gain_scale_db > 0.0 && n.interference_scale_db > 0.0 && n.payload_scale_bits > 0.0) {
            return Err(Error::config("env.normalization", "scales must be positive"));
        }
        Ok(())
    }
}

/// Sizes of the factored per-link action space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSpace {
    pub num_links: usize,
    pub num_subchannels: usize,
    pub num_powers: usize,
    pub num_diffusion: usize,
}

impl ActionSpace {
    pub fn per_link_size(&self) -> usize {
        self.num_subchannels * self.num_powers * self.num_diffusion
    }

    /// `per_link_size ^ num_links`, saturating at `u128::MAX`.
    pub fn joint_size(&self) -> u128 {
        (0..self.num_links).fold(1u128, |acc, _| acc.saturating_mul(self.per_link_size() as u128))
    }

    pub fn decode(&self, id: usize) -> Result<LinkAction> {
        if id >= self.per_link_size() {
            return Err(Error::InvalidAction(format!(
                "action id {id} outside 0..{}",
                self.per_link_size()
            )));
        }
        let pd = self.num_powers * self.num_diffusion;
        Ok(LinkAction {
            subchannel: id / pd,
            power: (id % pd) / self.num_diffusion,
            diffusion: id % self.num_diffusion,
        })
    }

    pub fn encode(&self, a: LinkAction) -> Result<usize> {
        if a.subchannel >= self.num_subchannels
            || a.power >= self.num_powers
            || a.diffusion >= self.num_diffusion
        {
            return Err(Error::InvalidAction(format!("{a:?} outside the action space")));
        }
        Ok(a.subchannel * self.num_powers * self.num_diffusion
            + a.power * self.num_diffusion
            + a.diffusion)
    }
}

/// `(per_link_size, joint_size)` for a configuration.
pub fn action_space(config: &EnvConfig) -> (usize, u128) {
    let s = config.action_space();
    (s.per_link_size(), s.joint_size())
}

/// One link's choice, as level indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LinkAction {
    pub subchannel: usize,
    pub power: usize,
    pub diffusion: usize,
}

/// Fixed-order feature vector seen by one link.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(Vec<f64>);

impl Observation {
    pub fn new(features: Vec<f64>) -> Self {
        Self(features)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// The previous action recorded in the trailing one-hot block, if any.
    pub fn previous_action(&self, per_link_size: usize) -> Option<usize> {
        let block = &self.0[self.0.len() - per_link_size..];
        block.iter().position(|&v| v == 1.0)
    }
}

impl Deref for Observation {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// One replayable experience tuple for a single link.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

/// Per-link detail of one slot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepInfo {
    pub sinr: Vec<f64>,
    pub rate: Vec<f64>,
    pub success: Vec<bool>,
    pub outage: Vec<f64>,
    pub qoe: Vec<f64>,
    pub similarity: Vec<f64>,
    pub generation_time: Vec<f64>,
    /// Payload bits delivered this slot (zero on failure).
    pub delivered_bits: Vec<f64>,
    /// `max(0, outage - cap)` per link.
    pub constraint_excess: Vec<f64>,
    pub system_qoe: f64,
    pub penalty_weight: f64,
}

impl StepInfo {
    /// Reward recomputed from the per-link fields.
    pub fn reward(&self) -> f64 {
        self.system_qoe - self.penalty_weight * self.constraint_excess.iter().sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub obs: Vec<Observation>,
    pub reward: f64,
    pub info: StepInfo,
    pub done: bool,
}

/// Outcome of a hypothetical slot, without advancing the environment.
#[derive(Debug, Clone)]
pub struct SlotEvaluation {
    pub reward: f64,
    pub info: StepInfo,
    /// `[link][sub-channel]` interference each receiver measured this slot.
    interference: Vec<f64>,
    tracker: OutageTracker,
}

#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    space: ActionSpace,
    coherence: Vec<f64>,
    rng: StreamRng,
    real: ChannelRealization,
    prev_real: ChannelRealization,
    tracker: OutageTracker,
    prev_action: Vec<Option<usize>>,
    prev_rate: Vec<f64>,
    prev_interference: Vec<f64>,
    slot: usize,
    done: bool,
}

impl Env {
    /// Validate `config` and reset to episode 0.
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let space = config.action_space();
        let coherence = config.coherence_times()?;
        let mut rng = rng::stream(config.seed, &[tag::ENV, 0]);
        let real =
            ChannelRealization::draw(&config.geometry, &config.channel, config.fading, &mut rng)?;
        let k = config.num_links;
        let c = config.num_subchannels();
        let mut env = Self {
            space,
            coherence,
            rng,
            prev_real: real.clone(),
            real,
            tracker: OutageTracker::new(k, config.qoe.outage_window),
            prev_action: vec![None; k],
            prev_rate: vec![0.0; k],
            prev_interference: vec![0.0; k * c],
            slot: 0,
            done: false,
            config,
        };
        env.reset(0)?;
        Ok(env)
    }

    /// Start a new episode. Shadowing and slot-0 fading are redrawn from a
    /// stream determined by `(config.seed, episode_seed)`.
    pub fn reset(&mut self, episode_seed: u64) -> Result<Vec<Observation>> {
        self.rng = rng::stream(self.config.seed, &[tag::ENV, tag::EPISODE, episode_seed]);
        self.real = ChannelRealization::draw(
            &self.config.geometry,
            &self.config.channel,
            self.config.fading,
            &mut self.rng,
        )?;
        self.prev_real = self.real.clone();
        self.tracker.clear();
        self.prev_action.iter_mut().for_each(|a| *a = None);
        self.prev_rate.iter_mut().for_each(|r| *r = 0.0);
        self.prev_interference.iter_mut().for_each(|i| *i = 0.0);
        self.slot = 0;
        self.done = false;
        Ok(self.observations())
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn space(&self) -> ActionSpace {
        self.space
    }

    pub fn num_links(&self) -> usize {
        self.config.num_links
    }

    pub fn coherence_times(&self) -> &[f64] {
        &self.coherence
    }

    /// Gains of the slot about to be played.
    pub fn realization(&self) -> &ChannelRealization {
        &self.real
    }

    /// Gains of the most recently played slot (the current slot right after reset).
    pub fn previous_realization(&self) -> &ChannelRealization {
        &self.prev_real
    }

    pub fn tracker(&self) -> &OutageTracker {
        &self.tracker
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Replace the current realization; used to replay frozen snapshots.
    pub fn set_realization(&mut self, real: ChannelRealization) -> Result<()> {
        if real.num_links() != self.num_links() || real.num_subchannels() != self.space.num_subchannels
        {
            return Err(Error::Shape("realization does not match the configuration".into()));
        }
        self.real = real;
        Ok(())
    }

    pub fn observations(&self) -> Vec<Observation> {
        (0..self.num_links()).map(|k| self.observe(k)).collect()
    }

    fn observe(&self, k: usize) -> Observation {
        let cfg = &self.config;
        let norm = &cfg.normalization;
        let nc = self.space.num_subchannels;
        let a = self.space.per_link_size();
        let mut f = Vec::with_capacity(2 * nc + 2 + a);
        for c in 0..nc {
            f.push((linear_to_db(self.real.gain(k, k, c)) + norm.gain_offset_db) / norm.gain_scale_db);
        }
        for c in 0..nc {
            let i = self.prev_interference[k * nc + c];
            f.push(linear_to_db(1.0 + i / cfg.channel.noise_power) / norm.interference_scale_db);
        }
        f.push(self.prev_rate[k] / cfg.qoe.rate_ref);
        f.push(cfg.content.payload_bits() / norm.payload_scale_bits);
        let start = f.len();
        f.resize(start + a, 0.0);
        if let Some(id) = self.prev_action[k] {
            f[start + id] = 1.0;
        }
        Observation(f)
    }

    /// Decode and validate one flat action id per link.
    pub fn decode_actions(&self, actions: &[usize]) -> Result<Vec<LinkAction>> {
        if actions.len() != self.num_links() {
            return Err(Error::InvalidAction(format!(
                "expected {} actions, got {}",
                self.num_links(),
                actions.len()
            )));
        }
        actions.iter().map(|&id| self.space.decode(id)).collect()
    }

    /// Content package a link would produce at diffusion level index `level`.
    pub fn content_profile(&self, level: usize) -> Result<ContentProfile> {
        let steps = *self
            .config
            .diffusion_levels
            .get(level)
            .ok_or_else(|| Error::InvalidAction(format!("diffusion level {level} out of range")))?;
        content::build_profile(steps, &self.config.content, &self.config.diffusion_levels)
    }

    /// Play `actions` on the current slot without changing any state.
    pub fn evaluate(&self, actions: &[usize]) -> Result<SlotEvaluation> {
        let decoded = self.decode_actions(actions)?;
        let cfg = &self.config;
        let k_links = self.num_links();
        let nc = self.space.num_subchannels;
        let powers: Vec<f64> = decoded.iter().map(|a| cfg.power_levels[a.power]).collect();
        let assignment: Vec<usize> = decoded.iter().map(|a| a.subchannel).collect();
        let mut tracker = self.tracker.clone();
        let mut info = StepInfo {
            penalty_weight: cfg.penalty_weight,
            ..StepInfo::default()
        };
        for (k, a) in decoded.iter().enumerate() {
            let sinr = channel::sinr(k, a.subchannel, &powers, &assignment, &self.real, &cfg.channel)?;
            let rate = channel::rate_bps(sinr, cfg.channel.subchannel_bandwidth)?;
            let profile = self.content_profile(a.diffusion)?;
            let success = qoe::success_indicator(
                rate,
                profile.payload_bits,
                profile.generation_time,
                cfg.qoe.deadline,
                self.coherence[k],
            );
            let outage = tracker.update(k, success)?;
            let similarity = profile.delivered_similarity();
            info.sinr.push(sinr);
            info.rate.push(rate);
            info.success.push(success);
            info.outage.push(outage);
            info.qoe.push(qoe::link_qoe(rate, similarity, success, &cfg.qoe));
            info.similarity.push(similarity);
            info.generation_time.push(profile.generation_time);
            info.delivered_bits.push(if success { profile.payload_bits } else { 0.0 });
            info.constraint_excess.push((outage - cfg.qoe.outage_cap).max(0.0));
        }
        info.system_qoe = qoe::system_qoe(&info.qoe)?;
        let mut interference = vec![0.0; k_links * nc];
        for k in 0..k_links {
            for c in 0..nc {
                interference[k * nc + c] =
                    channel::interference(k, c, &powers, &assignment, &self.real);
            }
        }
        Ok(SlotEvaluation {
            reward: info.reward(),
            info,
            interference,
            tracker,
        })
    }

    /// Play one slot and advance the channel.
    pub fn step(&mut self, actions: &[usize]) -> Result<StepResult> {
        if self.done {
            return Err(Error::Contract("episode finished; call reset".into()));
        }
        let eval = self.evaluate(actions)?;
        self.tracker = eval.tracker;
        self.prev_interference = eval.interference;
        self.prev_rate.copy_from_slice(&eval.info.rate);
        for (prev, &a) in self.prev_action.iter_mut().zip(actions) {
            *prev = Some(a);
        }
        self.slot += 1;
        self.done = self.slot >= self.config.episode_length;
        self.prev_real = self.real.clone();
        if !self.config.frozen_channel {
            self.real.advance(self.config.fading, &mut self.rng);
        } else {
            self.real.slot_index += 1;
        }
        Ok(StepResult {
            obs: self.observations(),
            reward: eval.reward,
            info: eval.info,
            done: self.done,
        })
    }
}

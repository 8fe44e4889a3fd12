//! Simulator for generative-AI-assisted V2V content delivery: sub-channel,
//! power and diffusion-step allocation under an outage constraint, with a
//! double DQN agent, DQN, greedy, random and exhaustive-oracle baselines, and
//! an experiment harness.

pub mod agents;
pub mod channel;
pub mod content;
pub mod env;
pub mod error;
pub mod harness;
pub mod neural;
pub mod qoe;
pub mod rng;

pub use agents::{AgentConfig, DqnAgent, GreedyInfo, Mode, Policy, PolicyKind, TargetRule};
pub use channel::{ChannelParams, ChannelRealization, FadingMode, LinkGeometry};
pub use content::{ContentParams, ContentProfile};
pub use env::{ActionSpace, Env, EnvConfig, LinkAction, Observation, StepInfo, StepResult, Transition};
pub use error::{Error, Result};
pub use harness::{CheckResult, ExperimentConfig, MetricsRow};
pub use neural::{Matrix, Mlp};
pub use qoe::{OutageTracker, QoeParams};

//! Twin Delayed DDPG: replay, clipped double-Q targets with target-policy
//! smoothing, delayed actor updates, Polyak-averaged targets, checkpoints and
//! the curriculum training loop.

mod agent;
pub mod checkpoint;
mod replay;
pub mod toy;
mod train;

pub use agent::{NetworkShape, Td3Agent, Td3Hyper, UpdateStats};
pub use replay::{Batch, ReplayBuffer, Transition};
pub use train::{
    evaluate, run_episode, train, BestPolicy, EnvStep, Environment, EpisodeMetrics, EvalEpisode, NoopObserver, StageChange,
    TrainObserver, TrainOutcome, TrainSettings, ValidationResult, ValidationSettings,
};

//! Swarm-vs-swarm engagement simulation and density-control learning.
//!
//! A defending swarm is commanded through group-level control distributions:
//! the learner picks how many k-means groups to form and, for each group, the
//! mean and variance of the acceleration commands its members sample. The
//! learner observes both swarms through Gaussian mixture fits of their
//! positions and is trained with TD3 over a staged curriculum.
//!
//! Module map:
//! - [`dynamics`]: unicycle kinematics with actuator limits.
//! - [`control`]: control sampling, k-means grouping, Vicsek flocking and the
//!   adversary behavior registry.
//! - [`estimation`]: GMM fitting and the flattened observation vector.
//! - [`environment`]: the engagement MDP, rewards, termination, curriculum.
//! - [`neural`]: dense networks, reverse-mode gradients, Adam.
//! - [`td3`]: replay, TD3 learner, checkpoints, the training loop.

pub mod config;
pub mod control;
pub mod dynamics;
pub mod environment;
pub mod error;
pub mod estimation;
pub mod neural;
pub mod report;
pub mod td3;

pub use error::{Error, Result};

use rand::SeedableRng;

/// Random stream used everywhere in the simulator and learner.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Creates a deterministic random stream from a seed.
pub fn seeded_rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

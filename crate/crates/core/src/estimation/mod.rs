//! Gaussian mixture summaries of swarm positions and the learner's observation.

mod gmm;
mod observation;

pub use gmm::{
    canonicalize, fit_gmm, fit_gmm_traced, gmm_log_likelihood, responsibilities, GmmFit,
    GmmOptions, GmmParams,
};
pub use observation::{build_observation, Observation, OBS_PER_COMPONENT};

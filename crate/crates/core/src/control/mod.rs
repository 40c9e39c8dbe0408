//! Group control distributions, k-means grouping and adversary behaviors.

mod adversary;
mod kmeans;
mod sampling;
mod vicsek;

pub use adversary::{
    scripted_adversary_controls, AdversaryModel, BehaviorRegistry, BehaviorSpec, ControllerGains,
    ScriptedBehavior, ScriptedModel, VicsekModel, Wave,
};
pub use kmeans::{assign_groups, kmeans_cost, GroupAssignment, KMeansOptions};
pub use sampling::{sample_agent_control, GroupControl};
pub use vicsek::{vicsek_step, VicsekParams};

//! The engagement MDP: scenarios, action decoding, the step pipeline,
//! eliminations, rewards, termination and curriculum staging.

mod action;
mod curriculum;
mod engagement;
mod reward;
mod scenario;
pub mod trajectory;

pub use action::{decode_action, ActionBounds, DecodedAction};
pub use curriculum::{curriculum_advance, Curriculum, CurriculumSettings};
pub use engagement::{
    apply_eliminations, check_termination, EliminationEvent, Engagement, EngagementConfig,
    EngagementEnv, Outcome, StepInfo, StepResult,
};
pub use reward::{compute_reward, RewardRegistry, RewardScheme, RewardWeights, Reward1, Reward2};
pub use scenario::{InitClump, ScenarioConfig};

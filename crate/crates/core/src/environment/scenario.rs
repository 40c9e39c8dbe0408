use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::control::BehaviorSpec;
use crate::dynamics::{apply_limits, AgentState, Limits, SwarmState};
use crate::{Error, Result};

/// A block of agents whose initial state fields are independent normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitClump {
    pub count: usize,
    pub mean: AgentState,
    #[serde(default)]
    pub std: AgentState,
}

impl InitClump {
    fn sample<R: Rng + ?Sized>(&self, limits: &Limits, rng: &mut R) -> AgentState {
        let mut draw = |m: f64, s: f64| {
            let z: f64 = StandardNormal.sample(rng);
            m + s * z
        };
        let (m, s) = (&self.mean, &self.std);
        let raw = AgentState {
            x: draw(m.x, s.x),
            y: draw(m.y, s.y),
            theta: draw(m.theta, s.theta),
            v: draw(m.v, s.v),
            omega: draw(m.omega, s.omega),
        };
        apply_limits(raw, limits)
    }
}

/// One engagement setup: swarm sizes and initial distributions, adversary
/// behavior, reward scheme, episode length and the defended region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub n_controlled: usize,
    pub n_adversarial: usize,
    pub controlled_init: Vec<InitClump>,
    pub adversarial_init: Vec<InitClump>,
    pub adversary: BehaviorSpec,
    /// Name of a registered reward scheme (`r1`, `r2`).
    pub reward_mode: String,
    pub max_decision_steps: usize,
    /// Adversaries reaching `x <= x_goal` breach the defended half-plane (m).
    pub x_goal: f64,
}

fn sample_side<R: Rng + ?Sized>(clumps: &[InitClump], limits: &Limits, rng: &mut R) -> SwarmState {
    let agents = clumps
        .iter()
        .flat_map(|c| std::iter::repeat_n(c, c.count))
        .map(|c| c.sample(limits, rng))
        .collect();
    SwarmState::new(agents)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let ctx = |m: &str| Error::config(format!("scenario '{}': {m}", self.name));
        if self.n_controlled == 0 || self.n_adversarial == 0 {
            return Err(ctx("swarm counts must be at least 1"));
        }
        if self.max_decision_steps == 0 {
            return Err(ctx("max_decision_steps must be at least 1"));
        }
        let total = |c: &[InitClump]| c.iter().map(|c| c.count).sum::<usize>();
        if total(&self.controlled_init) != self.n_controlled {
            return Err(ctx("controlled_init counts must add up to n_controlled"));
        }
        if total(&self.adversarial_init) != self.n_adversarial {
            return Err(ctx("adversarial_init counts must add up to n_adversarial"));
        }
        Ok(())
    }

    /// Draws both swarms: controlled first, then adversarial, clump by clump.
    pub fn sample_swarms<R: Rng + ?Sized>(&self, limits: &Limits, rng: &mut R) -> (SwarmState, SwarmState) {
        let controlled = sample_side(&self.controlled_init, limits, rng);
        let adversarial = sample_side(&self.adversarial_init, limits, rng);
        (controlled, adversarial)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn scenario() -> ScenarioConfig {
        ScenarioConfig {
            name: "t".into(),
            n_controlled: 3,
            n_adversarial: 2,
            controlled_init: vec![InitClump {
                count: 3,
                mean: AgentState::new(0.0, 0.0, 0.0, 50.0, 0.0),
                std: AgentState::new(10.0, 10.0, 0.1, 5.0, 0.0),
            }],
            adversarial_init: vec![
                InitClump {
                    count: 1,
                    mean: AgentState::new(100.0, 0.0, 0.0, 50.0, 0.0),
                    std: AgentState::default(),
                },
                InitClump {
                    count: 1,
                    mean: AgentState::new(200.0, 0.0, 0.0, 500.0, 0.0),
                    std: AgentState::default(),
                },
            ],
            adversary: BehaviorSpec::new("hold_course"),
            reward_mode: "r1".into(),
            max_decision_steps: 10,
            x_goal: -100.0,
        }
    }

    #[test]
    fn counts_must_match_clumps() {
        let mut s = scenario();
        s.validate().unwrap();
        s.n_controlled = 4;
        assert!(s.validate().is_err());
        let mut s = scenario();
        s.max_decision_steps = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn sampling_respects_clumps_and_limits() {
        let (c, a) = scenario().sample_swarms(&Limits::table_defaults(), &mut seeded_rng(1));
        assert_eq!(c.len(), 3);
        assert_eq!(a.agents[0].x, 100.0);
        // 500 m/s is clamped to v_max
        assert_eq!(a.agents[1].v, 300.0);
        assert!(c.agents.iter().all(|s| (30.0..=300.0).contains(&s.v)));
    }
}

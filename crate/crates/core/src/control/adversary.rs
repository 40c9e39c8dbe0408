//! Adversary behavior models, selected by name from the scenario file.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::vicsek::{vicsek_step, VicsekParams};
use crate::dynamics::{step_swarm, wrap_angle, ControlInput, Limits, SwarmState};
use crate::{Error, Result, SimRng};

/// Gains of the scripted heading/speed controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerGains {
    /// Heading-error gain (1/s).
    pub k_omega: f64,
    /// Speed-error gain (1/s).
    pub k_v: f64,
    /// Angular-rate damping (1/s).
    pub k_damp: f64,
    pub v_cruise: f64,
    /// Saturation of |u_v| (m/s^2).
    pub max_u_v: f64,
    /// Saturation of |u_w| (rad/s^2).
    pub max_u_w: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            k_omega: 1.0,
            k_v: 1.0,
            k_damp: 2.0,
            v_cruise: 60.0,
            max_u_v: 50.0,
            max_u_w: 1.0,
        }
    }
}

/// A block of consecutive adversaries sharing a goal and a start time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub count: usize,
    pub goal: [f64; 2],
    #[serde(default)]
    pub start_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScriptedBehavior {
    HoldCourse,
    FlyToGoal([f64; 2]),
    /// Waves take agents in index order; agents past the last wave hold course.
    Waves(Vec<Wave>),
}

fn steer(s: &crate::dynamics::AgentState, goal: [f64; 2], g: &ControllerGains) -> ControlInput {
    let bearing = (goal[1] - s.y).atan2(goal[0] - s.x);
    let err = wrap_angle(bearing - s.theta);
    ControlInput {
        u_v: (g.k_v * (g.v_cruise - s.v)).clamp(-g.max_u_v, g.max_u_v),
        u_w: (g.k_omega * err - g.k_damp * s.omega).clamp(-g.max_u_w, g.max_u_w),
    }
}

/// Per-agent commands for a scripted adversary at time `t`.
pub fn scripted_adversary_controls(
    swarm: &SwarmState,
    behavior: &ScriptedBehavior,
    t: f64,
    gains: &ControllerGains,
) -> Vec<ControlInput> {
    match behavior {
        ScriptedBehavior::HoldCourse => vec![ControlInput::ZERO; swarm.len()],
        ScriptedBehavior::FlyToGoal(goal) => swarm
            .agents
            .iter()
            .map(|s| steer(s, *goal, gains))
            .collect(),
        ScriptedBehavior::Waves(waves) => {
            let mut out = vec![ControlInput::ZERO; swarm.len()];
            let mut start = 0;
            for w in waves {
                let end = (start + w.count).min(swarm.len());
                if t >= w.start_time {
                    for i in start..end {
                        out[i] = steer(&swarm.agents[i], w.goal, gains);
                    }
                }
                start = end;
            }
            out
        }
    }
}

/// How the adversarial swarm moves during one simulation substep.
pub trait AdversaryModel: fmt::Debug + Send + Sync {
    fn name(&self) -> &str;

    fn substep(
        &self,
        swarm: &SwarmState,
        t: f64,
        limits: &Limits,
        rng: &mut SimRng,
    ) -> Result<SwarmState>;

    /// True when motion follows the unicycle update, so logs can be replayed.
    fn is_kinematic(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedModel {
    name: String,
    pub behavior: ScriptedBehavior,
    pub gains: ControllerGains,
}

impl ScriptedModel {
    pub fn new(name: impl Into<String>, behavior: ScriptedBehavior, gains: ControllerGains) -> Self {
        Self {
            name: name.into(),
            behavior,
            gains,
        }
    }
}

impl AdversaryModel for ScriptedModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn substep(&self, swarm: &SwarmState, t: f64, limits: &Limits, _: &mut SimRng) -> Result<SwarmState> {
        let controls = scripted_adversary_controls(swarm, &self.behavior, t, &self.gains);
        step_swarm(swarm, &controls, limits)
    }
}

#[derive(Debug, Clone)]
pub struct VicsekModel {
    pub params: VicsekParams,
}

impl AdversaryModel for VicsekModel {
    fn name(&self) -> &str {
        "vicsek"
    }

    fn substep(&self, swarm: &SwarmState, _: f64, limits: &Limits, rng: &mut SimRng) -> Result<SwarmState> {
        Ok(vicsek_step(swarm, &self.params, limits.dt_sim, rng))
    }

    fn is_kinematic(&self) -> bool {
        false
    }
}

/// Behavior tag plus its parameters, as written in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorSpec {
    pub kind: String,
    #[serde(flatten)]
    pub params: toml::Table,
}

impl BehaviorSpec {
    pub fn new(kind: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            params: toml::Table::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<toml::Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    fn parse<T: DeserializeOwned>(&self) -> Result<T> {
        toml::Value::Table(self.params.clone())
            .try_into()
            .map_err(|e| Error::config(format!("adversary '{}': {e}", self.kind)))
    }
}

type Factory = Box<dyn Fn(&BehaviorSpec) -> Result<Box<dyn AdversaryModel>> + Send + Sync>;

/// Name-keyed constructors for adversary models.
pub struct BehaviorRegistry {
    factories: BTreeMap<String, Factory>,
}

impl fmt::Debug for BehaviorRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

#[derive(Deserialize)]
struct GoalParams {
    goal: [f64; 2],
    #[serde(default)]
    gains: ControllerGains,
}

#[derive(Deserialize)]
struct WaveParams {
    waves: Vec<Wave>,
    #[serde(default)]
    gains: ControllerGains,
}

#[derive(Deserialize)]
struct HoldParams {
    #[serde(default)]
    gains: ControllerGains,
}

impl BehaviorRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// `hold_course`, `fly_to_goal`, `waves` and `vicsek`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("hold_course", |spec| {
            let p: HoldParams = spec.parse()?;
            Ok(Box::new(ScriptedModel::new("hold_course", ScriptedBehavior::HoldCourse, p.gains)))
        });
        r.register("fly_to_goal", |spec| {
            let p: GoalParams = spec.parse()?;
            Ok(Box::new(ScriptedModel::new(
                "fly_to_goal",
                ScriptedBehavior::FlyToGoal(p.goal),
                p.gains,
            )))
        });
        r.register("waves", |spec| {
            let p: WaveParams = spec.parse()?;
            Ok(Box::new(ScriptedModel::new("waves", ScriptedBehavior::Waves(p.waves), p.gains)))
        });
        r.register("vicsek", |spec| {
            let params: VicsekParams = spec.parse()?;
            params.validate()?;
            Ok(Box::new(VicsekModel { params }))
        });
        r
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&BehaviorSpec) -> Result<Box<dyn AdversaryModel>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, spec: &BehaviorSpec) -> Result<Box<dyn AdversaryModel>> {
        let factory = self.factories.get(&spec.kind).ok_or_else(|| {
            Error::config(format!(
                "unknown adversary behavior '{}' (known: {})",
                spec.kind,
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })?;
        factory(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::AgentState;
    use crate::seeded_rng;

    fn one(s: AgentState) -> SwarmState {
        SwarmState::new(vec![s])
    }

    #[test]
    fn hold_course_is_zero() {
        let swarm = SwarmState::new(vec![AgentState::new(0.0, 0.0, 1.0, 80.0, 0.2); 4]);
        let u = scripted_adversary_controls(&swarm, &ScriptedBehavior::HoldCourse, 3.0, &ControllerGains::default());
        assert_eq!(u, vec![ControlInput::ZERO; 4]);
    }

    #[test]
    fn on_course_at_cruise_is_quiet() {
        let g = ControllerGains::default();
        let s = AgentState::new(1000.0, 0.0, std::f64::consts::PI, g.v_cruise, 0.0);
        let u = scripted_adversary_controls(&one(s), &ScriptedBehavior::FlyToGoal([-5000.0, 0.0]), 0.0, &g);
        assert!(u[0].u_v.abs() < 1e-12 && u[0].u_w.abs() < 1e-12);
    }

    #[test]
    fn reversed_heading_saturates() {
        let g = ControllerGains::default();
        let s = AgentState::new(0.0, 0.0, 0.0, g.v_cruise, 0.0);
        let u = scripted_adversary_controls(&one(s), &ScriptedBehavior::FlyToGoal([-100.0, 0.0]), 0.0, &g);
        assert_eq!(u[0].u_w.abs(), g.max_u_w);
    }

    #[test]
    fn waves_wait_for_start_time() {
        let g = ControllerGains::default();
        let swarm = SwarmState::new(vec![AgentState::new(0.0, 0.0, 0.0, 30.0, 0.0); 3]);
        let waves = ScriptedBehavior::Waves(vec![
            Wave { count: 1, goal: [0.0, 100.0], start_time: 0.0 },
            Wave { count: 1, goal: [0.0, 100.0], start_time: 5.0 },
        ]);
        let u = scripted_adversary_controls(&swarm, &waves, 1.0, &g);
        assert_ne!(u[0], ControlInput::ZERO);
        assert_eq!(u[1], ControlInput::ZERO);
        assert_eq!(u[2], ControlInput::ZERO);
        let later = scripted_adversary_controls(&swarm, &waves, 5.0, &g);
        assert_eq!(later[0], later[1]);
    }

    #[test]
    fn registry_builds_known_kinds() {
        let reg = BehaviorRegistry::builtin();
        assert_eq!(reg.names().collect::<Vec<_>>(), ["fly_to_goal", "hold_course", "vicsek", "waves"]);
        let goal = reg
            .build(&BehaviorSpec::new("fly_to_goal").with("goal", toml::Value::Array(vec![1.0.into(), 2.0.into()])))
            .unwrap();
        assert_eq!(goal.name(), "fly_to_goal");
        let vicsek = reg
            .build(
                &BehaviorSpec::new("vicsek")
                    .with("radius", 50.0)
                    .with("noise_std", 0.1)
                    .with("speed", 40.0),
            )
            .unwrap();
        assert!(!vicsek.is_kinematic());
        let swarm = SwarmState::new(vec![AgentState::new(0.0, 0.0, 0.0, 40.0, 0.0); 2]);
        let next = vicsek.substep(&swarm, 0.0, &Limits::table_defaults(), &mut seeded_rng(1)).unwrap();
        assert_eq!(next.len(), 2);
    }

    #[test]
    fn registry_rejects_unknown_and_malformed() {
        let reg = BehaviorRegistry::builtin();
        let err = reg.build(&BehaviorSpec::new("kamikaze_dive")).unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("kamikaze_dive")));
        assert!(reg.build(&BehaviorSpec::new("fly_to_goal")).is_err());
        assert!(reg
            .build(&BehaviorSpec::new("vicsek").with("radius", -1.0).with("noise_std", 0.0).with("speed", 1.0))
            .is_err());
    }
}

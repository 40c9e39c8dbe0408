use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::action::{action_dim, decode_action, ActionBounds, DecodedAction};
use super::reward::{compute_reward, RewardRegistry, RewardScheme, RewardWeights};
use super::scenario::ScenarioConfig;
use super::trajectory::{agent_records, Side, TrajectoryRecord};
use crate::control::{
    assign_groups, sample_agent_control, AdversaryModel, BehaviorRegistry, GroupAssignment,
    KMeansOptions,
};
use crate::dynamics::{step_swarm, ControlInput, Limits, SwarmState};
use crate::estimation::{build_observation, canonicalize, fit_gmm, GmmOptions, GmmParams, Observation};
use crate::td3::{EnvStep, Environment};
use crate::{seeded_rng, Error, Result, SimRng};

/// A scenario together with every shared simulation constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementConfig {
    pub scenario: ScenarioConfig,
    pub limits: Limits,
    /// Positions are divided by this (and covariances by its square) in observations (m).
    pub map_scale: f64,
    pub impact_distance: f64,
    pub n_group_max: usize,
    pub n_cluster: usize,
    pub action: ActionBounds,
    pub reward: RewardWeights,
    pub kmeans: KMeansOptions,
    pub gmm: GmmOptions,
    /// When set, the nearest controlled unit in range is consumed by each elimination.
    pub kamikaze: bool,
}

impl EngagementConfig {
    pub fn observation_dim(&self) -> usize {
        Observation::dim(self.n_cluster)
    }

    pub fn action_dim(&self) -> usize {
        action_dim(self.n_group_max)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.limits.validate()?;
        self.reward.validate()?;
        if self.n_group_max == 0 || self.n_cluster == 0 {
            return Err(Error::config("n_group_max and n_cluster must be at least 1"));
        }
        if !(self.map_scale > 0.0) || !(self.impact_distance >= 0.0) {
            return Err(Error::config("map_scale must be positive, impact_distance non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Running,
    Success,
    Timeout,
    Breach,
}

impl Outcome {
    pub fn is_done(self) -> bool {
        self != Outcome::Running
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Running => "running",
            Outcome::Success => "success",
            Outcome::Timeout => "timeout",
            Outcome::Breach => "breach",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EliminationEvent {
    pub adversary_index: usize,
    /// Controlled units within impact distance at the moment of elimination.
    pub multiplicity: usize,
    pub time: f64,
}

#[derive(Debug, Clone)]
pub struct StepInfo {
    pub events: Vec<EliminationEvent>,
    pub decoded: DecodedAction,
    pub assignment: Option<GroupAssignment>,
    pub substeps: usize,
    pub elapsed: Duration,
    /// Decision and substep records; filled only while recording.
    pub records: Vec<TrajectoryRecord>,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub outcome: Outcome,
    pub info: StepInfo,
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Marks every alive adversary within `impact_distance` (inclusive) of an
/// alive controlled unit as eliminated.
pub fn apply_eliminations(
    controlled: &mut SwarmState,
    adversarial: &mut SwarmState,
    impact_distance: f64,
    time: f64,
    kamikaze: bool,
) -> Vec<EliminationEvent> {
    let r2 = impact_distance * impact_distance;
    let mut events = Vec::new();
    for a in 0..adversarial.len() {
        if !adversarial.alive[a] {
            continue;
        }
        let pa = adversarial.agents[a].position();
        let mut multiplicity = 0;
        let mut closest: Option<(usize, f64)> = None;
        for c in controlled.alive_indices() {
            let d = dist2(pa, controlled.agents[c].position());
            if d <= r2 {
                multiplicity += 1;
                if closest.is_none_or(|(_, best)| d < best) {
                    closest = Some((c, d));
                }
            }
        }
        if multiplicity == 0 {
            continue;
        }
        adversarial.alive[a] = false;
        if kamikaze {
            if let Some((c, _)) = closest {
                controlled.alive[c] = false;
            }
        }
        events.push(EliminationEvent {
            adversary_index: a,
            multiplicity,
            time,
        });
    }
    events
}

fn breached(adversarial: &SwarmState, x_goal: f64) -> bool {
    adversarial
        .alive_indices()
        .any(|i| adversarial.agents[i].x <= x_goal)
}

/// Success beats Breach beats Timeout.
pub fn check_termination(adversarial: &SwarmState, decision_step: usize, scenario: &ScenarioConfig) -> Outcome {
    if adversarial.alive_count() == 0 {
        Outcome::Success
    } else if breached(adversarial, scenario.x_goal) {
        Outcome::Breach
    } else if decision_step >= scenario.max_decision_steps {
        Outcome::Timeout
    } else {
        Outcome::Running
    }
}

/// One running engagement episode.
pub struct Engagement {
    cfg: EngagementConfig,
    adversary: Box<dyn AdversaryModel>,
    reward: Arc<dyn RewardScheme>,
    controlled: SwarmState,
    adversarial: SwarmState,
    rng: SimRng,
    substeps_elapsed: u64,
    decision_step: usize,
    controlled_gmm: GmmParams,
    adversarial_gmm: GmmParams,
    done: bool,
    recording: bool,
}

impl std::fmt::Debug for Engagement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engagement")
            .field("scenario", &self.cfg.scenario.name)
            .field("decision_step", &self.decision_step)
            .field("done", &self.done)
            .finish_non_exhaustive()
    }
}

impl Engagement {
    /// Samples both swarms, fits the initial mixtures and returns the first observation.
    pub fn reset(
        cfg: &EngagementConfig,
        behaviors: &BehaviorRegistry,
        rewards: &RewardRegistry,
        seed: u64,
    ) -> Result<(Self, Observation)> {
        cfg.validate()?;
        let adversary = behaviors.build(&cfg.scenario.adversary)?;
        let reward = rewards.get_shared(&cfg.scenario.reward_mode)?;
        let mut rng = seeded_rng(seed);
        let (controlled, adversarial) = cfg.scenario.sample_swarms(&cfg.limits, &mut rng);
        let placeholder = GmmParams::isotropic([0.0, 0.0], 1.0);
        let mut env = Self {
            cfg: cfg.clone(),
            adversary,
            reward,
            controlled,
            adversarial,
            rng,
            substeps_elapsed: 0,
            decision_step: 0,
            controlled_gmm: placeholder.clone(),
            adversarial_gmm: placeholder,
            done: false,
            recording: false,
        };
        let obs = env.observe()?;
        Ok((env, obs))
    }

    /// Reset with the built-in behavior and reward registries.
    pub fn with_builtins(cfg: &EngagementConfig, seed: u64) -> Result<(Self, Observation)> {
        Self::reset(cfg, &BehaviorRegistry::builtin(), &RewardRegistry::builtin(), seed)
    }

    pub fn set_recording(&mut self, on: bool) {
        self.recording = on;
    }

    pub fn config(&self) -> &EngagementConfig {
        &self.cfg
    }

    pub fn controlled(&self) -> &SwarmState {
        &self.controlled
    }

    pub fn adversarial(&self) -> &SwarmState {
        &self.adversarial
    }

    pub fn adversary_model(&self) -> &dyn AdversaryModel {
        self.adversary.as_ref()
    }

    pub fn time(&self) -> f64 {
        self.substeps_elapsed as f64 * self.cfg.limits.dt_sim
    }

    pub fn decision_step(&self) -> usize {
        self.decision_step
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Every agent of both swarms, for the `state` trajectory record.
    pub fn state_record(&self) -> TrajectoryRecord {
        TrajectoryRecord::State {
            t: self.time(),
            agents: agent_records(&self.controlled, &self.adversarial, |_, _| true),
        }
    }

    fn observe(&mut self) -> Result<Observation> {
        let k = self.cfg.n_cluster;
        let ctrl = self.controlled.alive_positions();
        if !ctrl.is_empty() {
            self.controlled_gmm = canonicalize(&fit_gmm(&ctrl, k, &self.cfg.gmm, &mut self.rng)?);
        }
        // an emptied swarm keeps its last fitted mixture
        let adv = self.adversarial.alive_positions();
        if !adv.is_empty() {
            self.adversarial_gmm = canonicalize(&fit_gmm(&adv, k, &self.cfg.gmm, &mut self.rng)?);
        }
        build_observation(&self.controlled_gmm, &self.adversarial_gmm, self.cfg.map_scale)
    }

    /// One decision step: decode, group, sample per-agent commands, simulate
    /// the substeps with eliminations, then observe, reward and check termination.
    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(Error::contract("step called on a finished episode"));
        }
        let started = Instant::now();
        let decoded = decode_action(action, self.cfg.n_group_max, &self.cfg.action)?;

        let mut controls = vec![ControlInput::ZERO; self.controlled.len()];
        let alive: Vec<usize> = self.controlled.alive_indices().collect();
        let assignment = if alive.is_empty() {
            None
        } else {
            let positions = self.controlled.alive_positions();
            let groups = assign_groups(&positions, decoded.n_group, &self.cfg.kmeans, &mut self.rng)?;
            for (&i, &label) in alive.iter().zip(&groups.labels) {
                controls[i] = sample_agent_control(&decoded.groups[label], &mut self.rng);
            }
            Some(groups)
        };

        let mut records = Vec::new();
        if self.recording {
            let (n_group, requested, centers) = match &assignment {
                Some(a) => (a.n_group, a.requested, a.centers.clone()),
                None => (0, decoded.n_group, Vec::new()),
            };
            records.push(TrajectoryRecord::Decision {
                step: self.decision_step,
                t: self.time(),
                n_group,
                requested_groups: requested,
                centers,
                groups: decoded.groups.clone(),
            });
        }

        let limits = self.cfg.limits;
        let mut events = Vec::new();
        let mut substeps = 0;
        for _ in 0..limits.substeps() {
            let t = self.time();
            let (was_c, was_a) = (self.controlled.alive.clone(), self.adversarial.alive.clone());
            self.controlled = step_swarm(&self.controlled, &controls, &limits)?;
            self.adversarial = self.adversary.substep(&self.adversarial, t, &limits, &mut self.rng)?;
            self.substeps_elapsed += 1;
            substeps += 1;
            let now = self.time();
            let fresh = apply_eliminations(
                &mut self.controlled,
                &mut self.adversarial,
                self.cfg.impact_distance,
                now,
                self.cfg.kamikaze,
            );
            if self.recording {
                records.push(TrajectoryRecord::Substep {
                    t: now,
                    agents: agent_records(&self.controlled, &self.adversarial, |side, i| match side {
                        Side::Controlled => was_c[i],
                        Side::Adversarial => was_a[i],
                    }),
                    eliminations: fresh.clone(),
                });
            }
            events.extend(fresh);
            if self.adversarial.alive_count() == 0 || breached(&self.adversarial, self.cfg.scenario.x_goal) {
                break;
            }
        }

        self.decision_step += 1;
        let outcome = check_termination(&self.adversarial, self.decision_step, &self.cfg.scenario);
        let reward = compute_reward(&events, outcome, self.reward.as_ref(), &self.cfg.reward);
        let observation = self.observe()?;
        self.done = outcome.is_done();
        Ok(StepResult {
            observation,
            reward,
            done: self.done,
            outcome,
            info: StepInfo {
                events,
                decoded,
                assignment,
                substeps,
                elapsed: started.elapsed(),
                records,
            },
        })
    }
}

/// Engagement episodes over a list of curriculum stages, as a learner environment.
pub struct EngagementEnv {
    stages: Vec<EngagementConfig>,
    behaviors: BehaviorRegistry,
    rewards: RewardRegistry,
    current: Option<Engagement>,
}

impl EngagementEnv {
    pub fn new(stages: Vec<EngagementConfig>) -> Result<Self> {
        let first = stages
            .first()
            .ok_or_else(|| Error::config("at least one scenario stage is required"))?;
        for s in &stages {
            s.validate()?;
            if s.observation_dim() != first.observation_dim() || s.action_dim() != first.action_dim() {
                return Err(Error::config(
                    "all curriculum stages must share n_cluster and n_group_max",
                ));
            }
        }
        Ok(Self {
            stages,
            behaviors: BehaviorRegistry::builtin(),
            rewards: RewardRegistry::builtin(),
            current: None,
        })
    }

    pub fn engagement(&self) -> Option<&Engagement> {
        self.current.as_ref()
    }
}

impl Environment for EngagementEnv {
    fn observation_dim(&self) -> usize {
        self.stages[0].observation_dim()
    }

    fn action_dim(&self) -> usize {
        self.stages[0].action_dim()
    }

    fn stage_count(&self) -> usize {
        self.stages.len()
    }

    fn stage_name(&self, stage: usize) -> String {
        self.stages[stage].scenario.name.clone()
    }

    fn reset(&mut self, stage: usize, seed: u64) -> Result<Vec<f64>> {
        let cfg = self
            .stages
            .get(stage)
            .ok_or_else(|| Error::contract(format!("no curriculum stage {stage}")))?;
        let (env, obs) = Engagement::reset(cfg, &self.behaviors, &self.rewards, seed)?;
        self.current = Some(env);
        Ok(obs.values)
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStep> {
        let env = self
            .current
            .as_mut()
            .ok_or_else(|| Error::contract("step before reset"))?;
        let r = env.step(action)?;
        Ok(EnvStep {
            observation: r.observation.values,
            reward: r.reward,
            done: r.done,
            terminal: matches!(r.outcome, Outcome::Success | Outcome::Breach),
            success: r.outcome == Outcome::Success,
            eliminations: r.info.events.len(),
        })
    }
}

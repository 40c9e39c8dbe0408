use std::time::Instant;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::agent::Td3Agent;
use super::replay::{ReplayBuffer, Transition};
use crate::environment::{Curriculum, CurriculumSettings};
use crate::{seeded_rng, Result};

/// Result of one decision step.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    /// Episode ended on its own (not by time limit); stored as `d` in replay.
    pub terminal: bool,
    pub success: bool,
    pub eliminations: usize,
}

impl EnvStep {
    pub fn outcome(&self) -> &'static str {
        match (self.done, self.success, self.terminal) {
            (false, _, _) => "running",
            (true, true, _) => "success",
            (true, false, true) => "breach",
            (true, false, false) => "timeout",
        }
    }
}

/// Episodic environment with actions in `[-1, 1]^action_dim`.
pub trait Environment {
    fn observation_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn stage_count(&self) -> usize {
        1
    }
    fn stage_name(&self, stage: usize) -> String {
        format!("stage{stage}")
    }
    fn reset(&mut self, stage: usize, seed: u64) -> Result<Vec<f64>>;
    fn step(&mut self, action: &[f64]) -> Result<EnvStep>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub total_steps: u64,
    pub seed: u64,
    /// Curriculum window and threshold; the stage list comes from the environment.
    pub curriculum_window: usize,
    pub curriculum_threshold: f64,
    pub checkpoint_every: Option<u64>,
    pub validation: Option<ValidationSettings>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let c = CurriculumSettings::default();
        Self {
            total_steps: 0,
            seed: 0,
            curriculum_window: c.window,
            curriculum_threshold: c.threshold,
            checkpoint_every: None,
            validation: None,
        }
    }
}

/// Periodic deterministic evaluation on held-out seeds, used to keep the best
/// policy seen on the current stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSettings {
    /// Environment steps between validations; 0 disables them.
    pub every: u64,
    pub episodes: usize,
    /// Episode `i` uses `seed + i`. Keep this range apart from evaluation seeds.
    pub seed: u64,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        Self {
            every: 0,
            episodes: 100,
            seed: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationResult {
    pub env_steps: u64,
    pub stage: usize,
    pub successes: usize,
    pub episodes: usize,
    pub mean_return: f64,
    /// Became the new best policy for this stage.
    pub improved: bool,
}

impl ValidationResult {
    fn beats(&self, other: &ValidationResult) -> bool {
        (self.successes, self.mean_return) > (other.successes, other.mean_return)
    }
}

/// Best validated policy on the final stage.
#[derive(Debug, Clone)]
pub struct BestPolicy {
    pub agent: Td3Agent,
    pub score: ValidationResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub episode: u64,
    pub stage: usize,
    pub stage_name: String,
    /// Environment steps taken when the episode ended.
    pub env_steps: u64,
    pub episode_return: f64,
    pub eliminations: usize,
    pub steps: u64,
    pub outcome: String,
    /// Seconds since training started. Not deterministic.
    pub wall_clock: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageChange {
    pub episode: u64,
    pub env_steps: u64,
    pub from: usize,
    pub to: usize,
    pub name: String,
}

/// Hooks called as training progresses.
pub trait TrainObserver {
    fn on_episode(&mut self, _m: &EpisodeMetrics) -> Result<()> {
        Ok(())
    }
    fn on_stage_change(&mut self, _c: &StageChange) -> Result<()> {
        Ok(())
    }
    fn on_checkpoint(&mut self, _agent: &Td3Agent, _env_steps: u64) -> Result<()> {
        Ok(())
    }
    fn on_validation(&mut self, _v: &ValidationResult) -> Result<()> {
        Ok(())
    }
}

pub struct NoopObserver;

impl TrainObserver for NoopObserver {}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: Td3Agent,
    pub episodes: Vec<EpisodeMetrics>,
    pub stage_changes: Vec<StageChange>,
    pub final_stage: usize,
    /// Set when validation is enabled.
    pub best: Option<BestPolicy>,
}

fn validate(
    env: &mut dyn Environment,
    agent: &Td3Agent,
    stage: usize,
    env_steps: u64,
    v: &ValidationSettings,
    best: &mut Option<BestPolicy>,
    observer: &mut dyn TrainObserver,
) -> Result<()> {
    let eps = evaluate(env, agent, stage, v.episodes, v.seed)?;
    let mut r = ValidationResult {
        env_steps,
        stage,
        successes: eps.iter().filter(|e| e.success).count(),
        episodes: eps.len(),
        mean_return: eps.iter().map(|e| e.episode_return).sum::<f64>() / eps.len().max(1) as f64,
        improved: false,
    };
    r.improved = best.as_ref().is_none_or(|b| r.beats(&b.score));
    observer.on_validation(&r)?;
    if r.improved {
        *best = Some(BestPolicy {
            agent: agent.clone(),
            score: r,
        });
    }
    Ok(())
}

/// Runs `total_steps` environment steps: uniform actions during warm-up,
/// then noisy policy actions with one TD3 update per step. Episodes are seeded
/// from the master stream, so a given seed reproduces the whole run.
///
/// With validation enabled, the policy is scored at the first episode end
/// after every `every` steps and once more at the end; the best score on the
/// current stage is kept. Validation never touches the training stream.
pub fn train(
    env: &mut dyn Environment,
    mut agent: Td3Agent,
    settings: &TrainSettings,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    let started = Instant::now();
    let mut rng = seeded_rng(settings.seed);
    let hyper = agent.hyper.clone();
    let mut buffer = ReplayBuffer::new(hyper.replay_capacity, env.observation_dim(), env.action_dim())?;
    let mut curriculum = Curriculum::new(CurriculumSettings {
        stages: (0..env.stage_count()).map(|s| env.stage_name(s)).collect(),
        window: settings.curriculum_window,
        threshold: settings.curriculum_threshold,
    })?;

    let mut episodes = Vec::new();
    let mut stage_changes = Vec::new();
    if settings.total_steps == 0 {
        return Ok(TrainOutcome {
            agent,
            episodes,
            stage_changes,
            final_stage: 0,
            best: None,
        });
    }
    let validation = settings.validation.filter(|v| v.every > 0 && v.episodes > 0);
    let mut best: Option<BestPolicy> = None;
    let mut validation_due = false;
    let mut last_validated = None;

    let mut obs = env.reset(curriculum.stage(), rng.next_u64())?;
    let (mut ep_return, mut ep_steps, mut ep_elims) = (0.0, 0u64, 0usize);
    for step in 0..settings.total_steps {
        let action = if step < hyper.warmup_steps {
            agent.random_action(&mut rng)
        } else {
            agent.select_action(&obs, hyper.exploration_noise_std, &mut rng)?
        };
        let out = env.step(&action)?;
        ep_return += out.reward;
        ep_steps += 1;
        ep_elims += out.eliminations;
        buffer.store(Transition {
            s: std::mem::take(&mut obs),
            a: action,
            r: out.reward,
            s_next: out.observation.clone(),
            d: out.terminal,
        })?;
        obs = out.observation.clone();

        if step >= hyper.warmup_steps && buffer.len() >= hyper.batch_size {
            let batch = buffer.sample(hyper.batch_size, &mut rng)?;
            agent.update(&batch, &mut rng)?;
        }
        let env_steps = step + 1;
        if validation.is_some_and(|v| env_steps % v.every == 0) {
            validation_due = true;
        }

        if out.done {
            let stage = curriculum.stage();
            let m = EpisodeMetrics {
                episode: episodes.len() as u64,
                stage,
                stage_name: curriculum.stage_name().to_string(),
                env_steps,
                episode_return: ep_return,
                eliminations: ep_elims,
                steps: ep_steps,
                outcome: out.outcome().to_string(),
                wall_clock: started.elapsed().as_secs_f64(),
            };
            observer.on_episode(&m)?;
            if curriculum.record(out.success) {
                let c = StageChange {
                    episode: m.episode,
                    env_steps,
                    from: stage,
                    to: curriculum.stage(),
                    name: curriculum.stage_name().to_string(),
                };
                observer.on_stage_change(&c)?;
                stage_changes.push(c);
                best = None;
            }
            episodes.push(m);
            if let Some(v) = validation.filter(|_| validation_due) {
                validate(env, &agent, curriculum.stage(), env_steps, &v, &mut best, observer)?;
                validation_due = false;
                last_validated = Some(env_steps);
            }
            obs = env.reset(curriculum.stage(), rng.next_u64())?;
            (ep_return, ep_steps, ep_elims) = (0.0, 0, 0);
        }
        if let Some(every) = settings.checkpoint_every {
            if every > 0 && env_steps % every == 0 {
                observer.on_checkpoint(&agent, env_steps)?;
            }
        }
    }
    if let Some(v) = validation.filter(|_| last_validated != Some(settings.total_steps)) {
        validate(env, &agent, curriculum.stage(), settings.total_steps, &v, &mut best, observer)?;
    }
    Ok(TrainOutcome {
        agent,
        episodes,
        final_stage: curriculum.stage(),
        stage_changes,
        best,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalEpisode {
    pub seed: u64,
    pub episode_return: f64,
    pub eliminations: usize,
    pub steps: u64,
    pub success: bool,
    pub outcome: String,
}

/// Plays one episode with the deterministic policy.
pub fn run_episode(env: &mut dyn Environment, agent: &Td3Agent, stage: usize, seed: u64) -> Result<EvalEpisode> {
    let mut obs = env.reset(stage, seed)?;
    let mut ep = EvalEpisode {
        seed,
        episode_return: 0.0,
        eliminations: 0,
        steps: 0,
        success: false,
        outcome: String::new(),
    };
    loop {
        let out = env.step(&agent.act(&obs)?)?;
        ep.episode_return += out.reward;
        ep.eliminations += out.eliminations;
        ep.steps += 1;
        if out.done {
            ep.success = out.success;
            ep.outcome = out.outcome().to_string();
            return Ok(ep);
        }
        obs = out.observation;
    }
}

/// `episodes` deterministic episodes seeded `seed, seed + 1, ...`.
pub fn evaluate(
    env: &mut dyn Environment,
    agent: &Td3Agent,
    stage: usize,
    episodes: usize,
    seed: u64,
) -> Result<Vec<EvalEpisode>> {
    (0..episodes as u64)
        .map(|i| run_episode(env, agent, stage, seed.wrapping_add(i)))
        .collect()
}

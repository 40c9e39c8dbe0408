use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::RngCore;

use swarm_engage::config::RunConfig;
use swarm_engage::environment::trajectory::{TrajectoryRecord, TrajectoryWriter};
use swarm_engage::environment::{Engagement, EngagementEnv};
use swarm_engage::report::{
    aggregate, read_metrics, CsvLog, EvalSummary, MetricsRow, StageRow, TimingRow, ValidationRow, DEFAULT_SMOOTHING,
    METRICS_HEADER, STAGES_HEADER, TIMING_HEADER, VALIDATION_HEADER,
};
use swarm_engage::td3::{
    checkpoint, evaluate, train, EpisodeMetrics, StageChange, Td3Agent, TrainObserver, ValidationResult,
};
use swarm_engage::seeded_rng;

#[derive(Parser)]
#[command(name = "swarm-engage", version, about = "Swarm engagement simulator and TD3 density-control trainer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy through the curriculum.
    Train(TrainArgs),
    /// Run the deterministic policy for a number of episodes and summarise.
    Eval(EvalArgs),
    /// Play one episode and write the full substep trajectory log.
    Rollout(RolloutArgs),
    /// Turn a metrics file into plot-ready JSON.
    Plot(PlotArgs),
    /// Print the built-in default configuration.
    InitConfig,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML file merged over the built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted-path override such as `td3.batch_size=64`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        if let Some(p) = &self.config {
            if !p.is_file() {
                bail!("config file {} not found", p.display());
            }
        }
        Ok(RunConfig::load(self.config.as_deref(), &self.overrides)?)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Total environment steps.
    #[arg(long)]
    steps: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Scenario name; defaults to the first curriculum stage.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    /// Episode `i` is seeded with `seed + i`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Summary JSON path; defaults to `<output_dir>/eval-<scenario>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RolloutArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trajectory log path; defaults to `<output_dir>/rollout-<scenario>-<seed>.jsonl`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    metrics: PathBuf,
    /// Output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exponential smoothing factor in (0, 1].
    #[arg(long, default_value_t = DEFAULT_SMOOTHING)]
    smoothing: f64,
}

struct RunLogs {
    metrics: CsvLog,
    stages: CsvLog,
    timing: CsvLog,
    validation: Option<CsvLog>,
    checkpoints: PathBuf,
}

impl TrainObserver for RunLogs {
    fn on_episode(&mut self, m: &EpisodeMetrics) -> swarm_engage::Result<()> {
        self.metrics.write(&MetricsRow::from(m))?;
        self.timing.write(&TimingRow {
            episode: m.episode,
            env_steps: m.env_steps,
            wall_clock: m.wall_clock,
        })
    }

    fn on_stage_change(&mut self, c: &StageChange) -> swarm_engage::Result<()> {
        eprintln!("stage {} -> {} ({}) after episode {}", c.from, c.to, c.name, c.episode);
        self.stages.write(&StageRow::from(c))
    }

    fn on_checkpoint(&mut self, agent: &Td3Agent, env_steps: u64) -> swarm_engage::Result<()> {
        checkpoint::save(agent, env_steps, &self.checkpoints.join(format!("step-{env_steps}.ckpt")))
    }

    fn on_validation(&mut self, v: &ValidationResult) -> swarm_engage::Result<()> {
        match &mut self.validation {
            Some(log) => log.write(&ValidationRow::from(v)),
            None => Ok(()),
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn run_train(args: TrainArgs) -> Result<()> {
    let mut cfg = args.config.load()?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.steps {
        cfg.total_steps = n;
    }
    if let Some(o) = args.out {
        cfg.output_dir = o;
    }
    let out = cfg.output_dir.clone();
    let ckpt_dir = out.join("checkpoints");
    create_dir(&ckpt_dir)?;
    fs::write(out.join("config.toml"), cfg.to_toml())
        .with_context(|| format!("cannot write {}", out.join("config.toml").display()))?;

    let mut env = EngagementEnv::new(cfg.curriculum_stages()?)?;
    let mut master = seeded_rng(cfg.seed);
    let agent = Td3Agent::new(
        cfg.curriculum_stages()?[0].observation_dim(),
        cfg.curriculum_stages()?[0].action_dim(),
        &cfg.network,
        cfg.td3.clone(),
        &mut master,
    )?;
    let mut settings = cfg.train_settings();
    settings.seed = master.next_u64();

    let mut logs = RunLogs {
        metrics: CsvLog::create(&out.join("metrics.csv"), &METRICS_HEADER)?,
        stages: CsvLog::create(&out.join("stages.csv"), &STAGES_HEADER)?,
        timing: CsvLog::create(&out.join("timing.csv"), &TIMING_HEADER)?,
        validation: match settings.validation {
            Some(_) => Some(CsvLog::create(&out.join("validation.csv"), &VALIDATION_HEADER)?),
            None => None,
        },
        checkpoints: ckpt_dir,
    };
    let result = train(&mut env, agent, &settings, &mut logs)?;
    let final_path = out.join("final.ckpt");
    checkpoint::save(&result.agent, cfg.total_steps, &final_path)?;
    if let Some(best) = &result.best {
        checkpoint::save(&best.agent, best.score.env_steps, &out.join("best.ckpt"))?;
        println!(
            "best validation {}/{} at step {}",
            best.score.successes, best.score.episodes, best.score.env_steps
        );
    }
    let successes = result.episodes.iter().filter(|m| m.outcome == "success").count();
    println!(
        "trained {} steps, {} episodes ({} successes), final stage {}; checkpoint {}",
        cfg.total_steps,
        result.episodes.len(),
        successes,
        cfg.curriculum.stages[result.final_stage],
        final_path.display()
    );
    Ok(())
}

/// Loads the checkpoint and checks it fits the scenario's dimensions.
fn load_for(cfg: &RunConfig, scenario: &str, path: &Path) -> Result<(Td3Agent, EngagementEnv)> {
    let stage = cfg.engagement_config(scenario)?;
    let (agent, _) = checkpoint::load(path).with_context(|| format!("cannot load {}", path.display()))?;
    if agent.obs_dim() != stage.observation_dim() || agent.act_dim() != stage.action_dim() {
        bail!(
            "checkpoint expects observation {} / action {}, scenario '{}' has {} / {}",
            agent.obs_dim(),
            agent.act_dim(),
            scenario,
            stage.observation_dim(),
            stage.action_dim()
        );
    }
    Ok((agent, EngagementEnv::new(vec![stage])?))
}

fn pick_scenario(cfg: &RunConfig, s: Option<String>) -> String {
    s.unwrap_or_else(|| cfg.curriculum.stages[0].clone())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let cfg = args.config.load()?;
    let scenario = pick_scenario(&cfg, args.scenario);
    let (agent, mut env) = load_for(&cfg, &scenario, &args.checkpoint)?;
    let episodes = evaluate(&mut env, &agent, 0, args.episodes, args.seed)?;
    let summary = EvalSummary::from_episodes(&scenario, &episodes);
    let text = serde_json::to_string_pretty(&summary)?;
    let out = args
        .out
        .unwrap_or_else(|| cfg.output_dir.join(format!("eval-{scenario}.json")));
    write_file(&out, &format!("{text}\n"))?;
    println!("{text}");
    Ok(())
}

fn run_rollout(args: RolloutArgs) -> Result<()> {
    let cfg = args.config.load()?;
    let scenario = pick_scenario(&cfg, args.scenario);
    let (agent, _) = load_for(&cfg, &scenario, &args.checkpoint)?;
    let stage = cfg.engagement_config(&scenario)?;
    let out = args
        .out
        .unwrap_or_else(|| cfg.output_dir.join(format!("rollout-{scenario}-{}.jsonl", args.seed)));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let mut log = TrajectoryWriter::create(&out).with_context(|| format!("cannot write {}", out.display()))?;

    let (mut env, mut obs) = Engagement::with_builtins(&stage, args.seed)?;
    env.set_recording(true);
    log.write(&TrajectoryRecord::header(&scenario, args.seed, stage.limits.dt_sim, stage.limits.dt_rl))?;
    log.write(&env.state_record())?;
    let mut total = 0.0;
    let outcome = loop {
        let r = env.step(&agent.act(&obs.values)?)?;
        for rec in &r.info.records {
            log.write(rec)?;
        }
        total += r.reward;
        obs = r.observation;
        if r.done {
            break r.outcome;
        }
    };
    log.write(&TrajectoryRecord::End {
        t: env.time(),
        outcome,
        decision_steps: env.decision_step(),
        episode_return: total,
    })?;
    let n = log.finish()?;
    println!(
        "{}: {} after {} decision steps, return {total}; {n} records in {}",
        scenario,
        outcome.as_str(),
        env.decision_step(),
        out.display()
    );
    Ok(())
}

fn run_plot(args: PlotArgs) -> Result<()> {
    let rows = read_metrics(&args.metrics)?;
    let data = aggregate(&rows, args.smoothing)?;
    let text = format!("{}\n", serde_json::to_string_pretty(&data)?);
    match args.out {
        Some(p) => write_file(&p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => run_train(a),
        Command::Eval(a) => run_eval(a),
        Command::Rollout(a) => run_rollout(a),
        Command::Plot(a) => run_plot(a),
        Command::InitConfig => {
            print!("{}", swarm_engage::config::DEFAULT_CONFIG);
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

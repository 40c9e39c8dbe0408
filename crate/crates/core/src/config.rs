//! Run configuration: built-in defaults, an optional TOML file merged on top,
//! then dotted `key.path=value` overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::KMeansOptions;
use crate::dynamics::Limits;
use crate::environment::{ActionBounds, CurriculumSettings, EngagementConfig, RewardWeights, ScenarioConfig};
use crate::estimation::GmmOptions;
use crate::td3::{NetworkShape, Td3Hyper, TrainSettings, ValidationSettings};
use crate::{Error, Result};

pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");

/// Constants shared by every scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    pub impact_distance: f64,
    pub n_group_max: usize,
    pub n_cluster: usize,
    /// Length used to normalise observations (m).
    pub map_scale: f64,
    /// Controlled units are spent on impact.
    pub kamikaze: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub total_steps: u64,
    /// Periodic checkpoint interval in environment steps; 0 keeps only the final one.
    pub checkpoint_every: u64,
    pub limits: Limits,
    pub sim: SimSettings,
    pub kmeans: KMeansOptions,
    pub gmm: GmmOptions,
    pub action: ActionBounds,
    pub reward: RewardWeights,
    pub network: NetworkShape,
    pub td3: Td3Hyper,
    pub curriculum: CurriculumSettings,
    #[serde(default)]
    pub validation: ValidationSettings,
    pub scenarios: BTreeMap<String, ScenarioConfig>,
}

/// Recursively overlays `top` onto `base`; tables merge, everything else replaces.
pub fn merge_tables(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge_tables(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses the right-hand side as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies `a.b.c=value` to `table`, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override '{assignment}' is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::config(format!("override '{assignment}' has an empty key")));
    }
    let mut node = table;
    for k in &keys[..keys.len() - 1] {
        let entry = node
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("override '{assignment}': '{k}' is not a table")))?;
    }
    node.insert(keys[keys.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    pub fn defaults() -> Self {
        Self::from_table(Self::default_table()).expect("built-in configuration is valid")
    }

    pub fn default_table() -> toml::Table {
        DEFAULT_CONFIG.parse().expect("built-in configuration parses")
    }

    /// Defaults, then `path` (if any), then `overrides` in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = Self::default_table();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let user: toml::Table = text
                .parse()
                .map_err(|e: toml::de::Error| Error::config(format!("{}: {}", p.display(), e.message())))?;
            merge_tables(&mut table, user);
        }
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.message().to_string()))?;
        for (name, s) in cfg.scenarios.iter_mut() {
            s.name = name.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.td3.validate()?;
        self.reward.validate()?;
        if self.curriculum.stages.is_empty() {
            return Err(Error::config("curriculum needs at least one stage"));
        }
        for name in &self.curriculum.stages {
            self.engagement_config(name)?;
        }
        for name in self.scenarios.keys() {
            self.engagement_config(name)?;
        }
        Ok(())
    }

    pub fn scenario_names(&self) -> Vec<String> {
        self.scenarios.keys().cloned().collect()
    }

    pub fn engagement_config(&self, scenario: &str) -> Result<EngagementConfig> {
        let s = self.scenarios.get(scenario).ok_or_else(|| {
            Error::config(format!(
                "unknown scenario '{scenario}' (known: {})",
                self.scenario_names().join(", ")
            ))
        })?;
        let cfg = EngagementConfig {
            scenario: s.clone(),
            limits: self.limits,
            map_scale: self.sim.map_scale,
            impact_distance: self.sim.impact_distance,
            n_group_max: self.sim.n_group_max,
            n_cluster: self.sim.n_cluster,
            action: self.action,
            reward: self.reward,
            kmeans: self.kmeans,
            gmm: self.gmm,
            kamikaze: self.sim.kamikaze,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Engagement configs in curriculum order.
    pub fn curriculum_stages(&self) -> Result<Vec<EngagementConfig>> {
        self.curriculum
            .stages
            .iter()
            .map(|n| self.engagement_config(n))
            .collect()
    }

    pub fn train_settings(&self) -> TrainSettings {
        TrainSettings {
            total_steps: self.total_steps,
            seed: self.seed,
            curriculum_window: self.curriculum.window,
            curriculum_threshold: self.curriculum.threshold,
            checkpoint_every: (self.checkpoint_every > 0).then_some(self.checkpoint_every),
            validation: (self.validation.every > 0).then_some(self.validation),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::defaults();
        assert_eq!(c.sim.n_cluster, 3);
        assert_eq!(c.sim.n_group_max, 5);
        assert_eq!(c.engagement_config("easy").unwrap().observation_dim(), 36);
        assert_eq!(c.engagement_config("easy").unwrap().action_dim(), 21);
        for s in &c.curriculum.stages {
            assert!(c.scenarios.contains_key(s));
        }
    }

    #[test]
    fn overrides_apply() {
        let c = RunConfig::load(
            None,
            &[
                "seed=42".into(),
                "td3.batch_size=8".into(),
                "scenarios.easy.max_decision_steps=7".into(),
                "output_dir=elsewhere".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.seed, 42);
        assert_eq!(c.td3.batch_size, 8);
        assert_eq!(c.scenarios["easy"].max_decision_steps, 7);
        assert_eq!(c.output_dir, PathBuf::from("elsewhere"));
    }

    #[test]
    fn unknown_stage_rejected() {
        let err = RunConfig::load(None, &["curriculum.stages=[\"nope\"]".into()]).unwrap_err();
        assert!(err.to_string().contains("unknown scenario 'nope'"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(RunConfig::load(None, &["td3.batchsize=8".into()]).is_err());
        assert!(RunConfig::load(None, &["no_equals".into()]).is_err());
    }

    #[test]
    fn file_merges_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "total_steps = 123\n[td3]\nwarmup_steps = 9\n").unwrap();
        let c = RunConfig::load(Some(&p), &[]).unwrap();
        assert_eq!(c.total_steps, 123);
        assert_eq!(c.td3.warmup_steps, 9);
        assert_eq!(c.td3.gamma, 0.99);
    }

    #[test]
    fn missing_file_names_path() {
        let err = RunConfig::load(Some(Path::new("/no/such/run.toml")), &[]).unwrap_err();
        assert!(err.to_string().contains("/no/such/run.toml"));
    }

    #[test]
    fn round_trips_through_toml() {
        let c = RunConfig::defaults();
        let back = RunConfig::from_table(c.to_toml().parse().unwrap()).unwrap();
        assert_eq!(c, back);
    }
}

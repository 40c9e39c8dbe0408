//! Reward schemes, selected by name from the scenario file.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::engagement::{EliminationEvent, Outcome};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    /// Per eliminated adversary.
    pub r_elim: f64,
    /// Charged every decision step.
    pub c_time: f64,
    /// Per elimination covered by two or more controlled units (Reward-2 only).
    pub b_cover: f64,
    pub success_bonus: f64,
    pub breach_penalty: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            r_elim: 0.5,
            c_time: 0.02,
            b_cover: 0.25,
            success_bonus: 5.0,
            breach_penalty: 5.0,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.r_elim,
            self.c_time,
            self.b_cover,
            self.success_bonus,
            self.breach_penalty,
        ];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::config("reward weights must be finite and non-negative"));
        }
        Ok(())
    }
}

pub trait RewardScheme: fmt::Debug + Send + Sync {
    fn name(&self) -> &str;
    fn reward(&self, events: &[EliminationEvent], outcome: Outcome, w: &RewardWeights) -> f64;
}

/// Eliminations only, with a time charge and terminal bonus/penalty.
#[derive(Debug, Clone, Copy, Default)]
pub struct Reward1;

/// Reward-1 plus a bonus for every elimination made with numerical superiority.
#[derive(Debug, Clone, Copy, Default)]
pub struct Reward2;

impl RewardScheme for Reward1 {
    fn name(&self) -> &str {
        "r1"
    }

    fn reward(&self, events: &[EliminationEvent], outcome: Outcome, w: &RewardWeights) -> f64 {
        let terminal = match outcome {
            Outcome::Success => w.success_bonus,
            Outcome::Breach => -w.breach_penalty,
            Outcome::Timeout | Outcome::Running => 0.0,
        };
        w.r_elim * events.len() as f64 - w.c_time + terminal
    }
}

impl RewardScheme for Reward2 {
    fn name(&self) -> &str {
        "r2"
    }

    fn reward(&self, events: &[EliminationEvent], outcome: Outcome, w: &RewardWeights) -> f64 {
        let covered = events.iter().filter(|e| e.multiplicity >= 2).count();
        Reward1.reward(events, outcome, w) + w.b_cover * covered as f64
    }
}

/// Name-keyed reward schemes.
pub struct RewardRegistry {
    schemes: BTreeMap<String, Arc<dyn RewardScheme>>,
}

impl fmt::Debug for RewardRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.schemes.keys()).finish()
    }
}

impl RewardRegistry {
    pub fn builtin() -> Self {
        let mut r = Self {
            schemes: BTreeMap::new(),
        };
        r.register(Arc::new(Reward1));
        r.register(Arc::new(Reward2));
        r
    }

    pub fn register(&mut self, scheme: Arc<dyn RewardScheme>) {
        self.schemes.insert(scheme.name().to_string(), scheme);
    }

    pub fn get(&self, name: &str) -> Result<&dyn RewardScheme> {
        self.schemes
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::config(format!("unknown reward mode '{name}'")))
    }

    pub fn get_shared(&self, name: &str) -> Result<Arc<dyn RewardScheme>> {
        self.schemes
            .get(name)
            .cloned()
            .ok_or_else(|| Error::config(format!("unknown reward mode '{name}'")))
    }
}

/// Reward of one decision step under the named scheme.
pub fn compute_reward(
    events: &[EliminationEvent],
    outcome: Outcome,
    scheme: &dyn RewardScheme,
    w: &RewardWeights,
) -> f64 {
    scheme.reward(events, outcome, w)
}

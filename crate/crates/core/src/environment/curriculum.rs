use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurriculumSettings {
    /// Scenario names, easiest first.
    pub stages: Vec<String>,
    /// Episodes in the rolling success window.
    pub window: usize,
    /// Success rate over a full window needed to move on.
    pub threshold: f64,
}

impl Default for CurriculumSettings {
    fn default() -> Self {
        Self {
            stages: ["easy", "scenario1", "scenario2", "scenario3"]
                .map(String::from)
                .to_vec(),
            window: 50,
            threshold: 0.8,
        }
    }
}

/// Next stage index given the rolling success rate (`None` while the window
/// is still filling). Never regresses; the last stage absorbs.
pub fn curriculum_advance(stage: usize, success_rate: Option<f64>, n_stages: usize, threshold: f64) -> usize {
    let last = n_stages.saturating_sub(1);
    match success_rate {
        Some(rate) if rate >= threshold && stage < last => stage + 1,
        _ => stage.min(last),
    }
}

/// Tracks recent episode outcomes at the current stage.
#[derive(Debug, Clone)]
pub struct Curriculum {
    settings: CurriculumSettings,
    stage: usize,
    recent: VecDeque<bool>,
}

impl Curriculum {
    pub fn new(settings: CurriculumSettings) -> Result<Self> {
        if settings.stages.is_empty() || settings.window == 0 {
            return Err(Error::config("curriculum needs at least one stage and a window of 1+"));
        }
        Ok(Self {
            settings,
            stage: 0,
            recent: VecDeque::new(),
        })
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn stage_name(&self) -> &str {
        &self.settings.stages[self.stage]
    }

    pub fn success_rate(&self) -> Option<f64> {
        (self.recent.len() == self.settings.window)
            .then(|| self.recent.iter().filter(|&&s| s).count() as f64 / self.settings.window as f64)
    }

    /// Records an episode; returns true when the stage advanced. The window
    /// restarts on every advance.
    pub fn record(&mut self, success: bool) -> bool {
        self.recent.push_back(success);
        if self.recent.len() > self.settings.window {
            self.recent.pop_front();
        }
        let next = curriculum_advance(
            self.stage,
            self.success_rate(),
            self.settings.stages.len(),
            self.settings.threshold,
        );
        let moved = next != self.stage;
        if moved {
            self.stage = next;
            self.recent.clear();
        }
        moved
    }
}

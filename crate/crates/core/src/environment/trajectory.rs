//! Line-delimited JSON trajectory log.
//!
//! The first line is a [`TrajectoryRecord::Header`]. After it come one
//! `state` record with every agent at reset, then per decision step one
//! `decision` record followed by a `substep` record for each simulated
//! substep, and a closing `end` record. Agent entries are arrays in the
//! order given by [`AGENT_FIELDS`]. A substep lists the agents that were
//! alive when it started, so an agent eliminated during it appears once
//! more with `alive = false`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::engagement::{EliminationEvent, Outcome};
use crate::control::GroupControl;
use crate::dynamics::{AgentState, SwarmState};
use crate::{Error, Result};

pub const FORMAT_NAME: &str = "swarm-engage-trajectory";
pub const FORMAT_VERSION: u32 = 1;
pub const AGENT_FIELDS: [&str; 8] = ["id", "side", "alive", "x", "y", "theta", "v", "omega"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Controlled,
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord(pub usize, pub Side, pub bool, pub f64, pub f64, pub f64, pub f64, pub f64);

impl AgentRecord {
    pub fn new(id: usize, side: Side, alive: bool, s: &AgentState) -> Self {
        Self(id, side, alive, s.x, s.y, s.theta, s.v, s.omega)
    }

    pub fn state(&self) -> AgentState {
        AgentState::new(self.3, self.4, self.5, self.6, self.7)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryRecord {
    Header {
        format: String,
        version: u32,
        scenario: String,
        seed: u64,
        dt_sim: f64,
        dt_rl: f64,
        agent_fields: Vec<String>,
    },
    State {
        t: f64,
        agents: Vec<AgentRecord>,
    },
    Decision {
        step: usize,
        t: f64,
        n_group: usize,
        requested_groups: usize,
        centers: Vec<[f64; 2]>,
        groups: Vec<GroupControl>,
    },
    Substep {
        t: f64,
        agents: Vec<AgentRecord>,
        eliminations: Vec<EliminationEvent>,
    },
    End {
        t: f64,
        outcome: Outcome,
        decision_steps: usize,
        episode_return: f64,
    },
}

impl TrajectoryRecord {
    pub fn header(scenario: &str, seed: u64, dt_sim: f64, dt_rl: f64) -> Self {
        TrajectoryRecord::Header {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            scenario: scenario.to_string(),
            seed,
            dt_sim,
            dt_rl,
            agent_fields: AGENT_FIELDS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Agent entries for both swarms, keeping indices where `keep(side, i)` holds.
pub(crate) fn agent_records(
    controlled: &SwarmState,
    adversarial: &SwarmState,
    keep: impl Fn(Side, usize) -> bool,
) -> Vec<AgentRecord> {
    let mut out = Vec::new();
    for (side, swarm) in [(Side::Controlled, controlled), (Side::Adversarial, adversarial)] {
        for (i, (s, &alive)) in swarm.agents.iter().zip(&swarm.alive).enumerate() {
            if keep(side, i) {
                out.push(AgentRecord::new(i, side, alive, s));
            }
        }
    }
    out
}

pub struct TrajectoryWriter {
    path: PathBuf,
    out: BufWriter<File>,
    records: usize,
}

impl TrajectoryWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            path,
            out: BufWriter::new(file),
            records: 0,
        })
    }

    pub fn write(&mut self, record: &TrajectoryRecord) -> Result<()> {
        let line = serde_json::to_string(record).expect("trajectory records serialise");
        writeln!(self.out, "{line}").map_err(|e| Error::io(&self.path, e))?;
        self.records += 1;
        Ok(())
    }

    pub fn records(&self) -> usize {
        self.records
    }

    pub fn finish(mut self) -> Result<usize> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.records)
    }
}

/// Parses a trajectory log back into records.
pub fn read_trajectory(path: impl AsRef<Path>) -> Result<Vec<TrajectoryRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

//! Binary checkpoints: one text header line, then the six parameter vectors as
//! little-endian `f64` in the order actor, critic 1, critic 2 and their targets.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::agent::{Td3Agent, Td3Hyper};
use crate::neural::{Mlp, MlpSpec};
use crate::{Error, Result};

const MAGIC: &str = "SWARMCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub actor: MlpSpec,
    pub critic: MlpSpec,
    pub hyper: Td3Hyper,
    pub updates: u64,
    pub env_steps: u64,
}

fn header_of(agent: &Td3Agent, env_steps: u64) -> CheckpointHeader {
    CheckpointHeader {
        version: CHECKPOINT_VERSION,
        obs_dim: agent.obs_dim(),
        act_dim: agent.act_dim(),
        actor: agent.actor.spec().clone(),
        critic: agent.critic1.spec().clone(),
        hyper: agent.hyper.clone(),
        updates: agent.updates(),
        env_steps,
    }
}

fn nets(agent: &Td3Agent) -> [&Mlp; 6] {
    [
        &agent.actor,
        &agent.critic1,
        &agent.critic2,
        &agent.actor_target,
        &agent.critic1_target,
        &agent.critic2_target,
    ]
}

pub fn save(agent: &Td3Agent, env_steps: u64, path: &Path) -> Result<()> {
    let header = serde_json::to_string(&header_of(agent, env_steps))
        .map_err(|e| Error::contract(format!("checkpoint header: {e}")))?;
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    writeln!(w, "{MAGIC} {CHECKPOINT_VERSION} {header}").map_err(|e| Error::io(path, e))?;
    for net in nets(agent) {
        for p in net.params() {
            w.write_all(&p.to_le_bytes()).map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads a checkpoint. Optimiser moments are not stored, so they restart at zero.
pub fn load(path: &Path) -> Result<(Td3Agent, CheckpointHeader)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(f);
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line).map_err(|e| Error::io(path, e))?;
    let line = std::str::from_utf8(&line)
        .map_err(|_| Error::CheckpointHeader("header is not text".into()))?
        .trim_end();
    let mut parts = line.splitn(3, ' ');
    if parts.next() != Some(MAGIC) {
        return Err(Error::CheckpointHeader("missing magic".into()));
    }
    let version = parts.next().and_then(|v| v.parse::<u32>().ok());
    if version != Some(CHECKPOINT_VERSION) {
        return Err(Error::CheckpointHeader(format!(
            "unsupported version {version:?}"
        )));
    }
    let header: CheckpointHeader = serde_json::from_str(parts.next().unwrap_or(""))
        .map_err(|e| Error::CheckpointHeader(e.to_string()))?;
    if header.actor.input_dim() != header.obs_dim
        || header.actor.output_dim() != header.act_dim
        || header.critic.input_dim() != header.obs_dim + header.act_dim
    {
        return Err(Error::CheckpointHeader("dimensions disagree".into()));
    }
    header
        .actor
        .validate()
        .and(header.critic.validate())
        .map_err(|e| Error::CheckpointHeader(e.to_string()))?;

    let mut body = Vec::new();
    r.read_to_end(&mut body).map_err(|e| Error::io(path, e))?;
    let (na, nc) = (header.actor.param_count(), header.critic.param_count());
    let expected = 8 * 2 * (na + 2 * nc);
    if body.len() != expected {
        return Err(Error::CheckpointHeader(format!(
            "body has {} bytes, header implies {expected}",
            body.len()
        )));
    }
    let mut values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let mut take = |spec: &MlpSpec| Mlp::from_params(spec, values.by_ref().take(spec.param_count()).collect());
    let actor = take(&header.actor)?;
    let c1 = take(&header.critic)?;
    let c2 = take(&header.critic)?;
    let at = take(&header.actor)?;
    let c1t = take(&header.critic)?;
    let c2t = take(&header.critic)?;
    let mut agent = Td3Agent::from_networks(actor, c1, c2, header.hyper.clone())
        .map_err(|e| Error::CheckpointHeader(e.to_string()))?;
    agent.actor_target = at;
    agent.critic1_target = c1t;
    agent.critic2_target = c2t;
    agent.set_updates(header.updates);
    Ok((agent, header))
}

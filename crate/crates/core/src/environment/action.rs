use serde::{Deserialize, Serialize};

use crate::control::GroupControl;
use crate::{Error, Result};

/// Physical ranges the normalised action channels map onto.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActionBounds {
    /// Mean forward acceleration spans [-u_v_max, u_v_max] (m/s^2).
    pub u_v_max: f64,
    /// Mean angular acceleration spans [-u_w_max, u_w_max] (rad/s^2).
    pub u_w_max: f64,
    /// Forward-acceleration variance spans [0, var_v_max] ((m/s^2)^2).
    pub var_v_max: f64,
    /// Angular-acceleration variance spans [0, var_w_max] ((rad/s^2)^2).
    pub var_w_max: f64,
}

impl Default for ActionBounds {
    fn default() -> Self {
        Self {
            u_v_max: 50.0,
            u_w_max: 1.0,
            var_v_max: 25.0,
            var_w_max: 0.25,
        }
    }
}

/// Channels per group: mean u_v, mean u_w, var u_v, var u_w.
pub const CHANNELS_PER_GROUP: usize = 4;

/// Length of the raw action for a given maximum group count.
pub fn action_dim(n_group_max: usize) -> usize {
    1 + CHANNELS_PER_GROUP * n_group_max
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedAction {
    pub n_group: usize,
    /// Only the first `n_group` distributions; the rest of the raw action is unused.
    pub groups: Vec<GroupControl>,
}

fn unit(x: f64) -> f64 {
    (x.clamp(-1.0, 1.0) + 1.0) * 0.5
}

/// Turns a raw action in [-1, 1]^(1 + 4 n_group_max) into a group count and
/// per-group control distributions. Out-of-range entries are clamped.
pub fn decode_action(raw: &[f64], n_group_max: usize, bounds: &ActionBounds) -> Result<DecodedAction> {
    if n_group_max == 0 || raw.len() != action_dim(n_group_max) {
        return Err(Error::contract(format!(
            "decode_action: length {} for n_group_max {}",
            raw.len(),
            n_group_max
        )));
    }
    if raw.iter().any(|x| x.is_nan()) {
        return Err(Error::contract("decode_action: NaN in action"));
    }
    let n_group = (1 + (unit(raw[0]) * n_group_max as f64).floor() as usize).clamp(1, n_group_max);
    let groups = raw[1..]
        .chunks_exact(CHANNELS_PER_GROUP)
        .take(n_group)
        .map(|c| GroupControl {
            mu_v: -bounds.u_v_max + 2.0 * bounds.u_v_max * unit(c[0]),
            mu_w: -bounds.u_w_max + 2.0 * bounds.u_w_max * unit(c[1]),
            var_v: bounds.var_v_max * unit(c[2]),
            var_w: bounds.var_w_max * unit(c[3]),
        })
        .collect();
    Ok(DecodedAction { n_group, groups })
}

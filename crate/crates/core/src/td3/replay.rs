use rand::Rng;

use crate::{Error, Result};

/// One `(s, a, r, s', d)` tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    /// True terminal (not a time-limit cut).
    pub d: bool,
}

/// Row-major minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub len: usize,
    pub obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_obs: Vec<f64>,
    /// 1.0 for terminal transitions, else 0.0.
    pub dones: Vec<f64>,
}

/// Fixed-capacity FIFO of transitions stored in flat arrays.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    obs: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_obs: Vec<f64>,
    dones: Vec<bool>,
    cursor: usize,
    size: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("replay capacity must be at least 1"));
        }
        Ok(Self {
            capacity,
            obs_dim,
            act_dim,
            obs: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_obs: Vec::new(),
            dones: Vec::new(),
            cursor: 0,
            size: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Appends, overwriting the oldest entry once full.
    pub fn store(&mut self, t: Transition) -> Result<()> {
        if t.s.len() != self.obs_dim || t.s_next.len() != self.obs_dim || t.a.len() != self.act_dim {
            return Err(Error::contract(format!(
                "replay: transition dims ({}, {}, {}) for obs {} / action {}",
                t.s.len(),
                t.a.len(),
                t.s_next.len(),
                self.obs_dim,
                self.act_dim
            )));
        }
        if self.size < self.capacity {
            self.obs.extend_from_slice(&t.s);
            self.actions.extend_from_slice(&t.a);
            self.rewards.push(t.r);
            self.next_obs.extend_from_slice(&t.s_next);
            self.dones.push(t.d);
            self.size += 1;
        } else {
            let i = self.cursor;
            let (o, a) = (i * self.obs_dim, i * self.act_dim);
            self.obs[o..o + self.obs_dim].copy_from_slice(&t.s);
            self.actions[a..a + self.act_dim].copy_from_slice(&t.a);
            self.rewards[i] = t.r;
            self.next_obs[o..o + self.obs_dim].copy_from_slice(&t.s_next);
            self.dones[i] = t.d;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Slot `i` in storage order.
    fn slot(&self, i: usize) -> Transition {
        let (o, a) = (i * self.obs_dim, i * self.act_dim);
        Transition {
            s: self.obs[o..o + self.obs_dim].to_vec(),
            a: self.actions[a..a + self.act_dim].to_vec(),
            r: self.rewards[i],
            s_next: self.next_obs[o..o + self.obs_dim].to_vec(),
            d: self.dones[i],
        }
    }

    /// Stored transitions, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = Transition> + '_ {
        let start = if self.size < self.capacity { 0 } else { self.cursor };
        (0..self.size).map(move |k| self.slot((start + k) % self.capacity))
    }

    /// Uniform storage indices, drawn with replacement. Only an empty buffer
    /// is underfilled: `n` may exceed the fill level.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.size == 0 && n > 0 {
            return Err(Error::BufferUnderfilled {
                size: self.size,
                requested: n,
            });
        }
        Ok((0..n).map(|_| rng.random_range(0..self.size)).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Batch> {
        let idx = self.sample_indices(n, rng)?;
        Ok(self.gather(&idx))
    }

    pub fn gather(&self, idx: &[usize]) -> Batch {
        let mut b = Batch {
            len: idx.len(),
            obs: Vec::with_capacity(idx.len() * self.obs_dim),
            actions: Vec::with_capacity(idx.len() * self.act_dim),
            rewards: Vec::with_capacity(idx.len()),
            next_obs: Vec::with_capacity(idx.len() * self.obs_dim),
            dones: Vec::with_capacity(idx.len()),
        };
        for &i in idx {
            let (o, a) = (i * self.obs_dim, i * self.act_dim);
            b.obs.extend_from_slice(&self.obs[o..o + self.obs_dim]);
            b.actions.extend_from_slice(&self.actions[a..a + self.act_dim]);
            b.rewards.push(self.rewards[i]);
            b.next_obs.extend_from_slice(&self.next_obs[o..o + self.obs_dim]);
            b.dones.push(if self.dones[i] { 1.0 } else { 0.0 });
        }
        b
    }
}

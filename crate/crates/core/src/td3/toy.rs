//! One-dimensional point mass used to sanity-check the learner.

use rand::Rng;

use super::train::{EnvStep, Environment};
use crate::{seeded_rng, Error, Result};

/// `x' = x + step_size * a`, reward `-|x'|`, start `x ~ U(-1, 1)`.
#[derive(Debug, Clone)]
pub struct PointMass {
    pub horizon: u64,
    pub step_size: f64,
    x: f64,
    t: u64,
    live: bool,
}

impl Default for PointMass {
    fn default() -> Self {
        Self {
            horizon: 50,
            step_size: 0.1,
            x: 0.0,
            t: 0,
            live: false,
        }
    }
}

impl PointMass {
    pub fn position(&self) -> f64 {
        self.x
    }
}

impl Environment for PointMass {
    fn observation_dim(&self) -> usize {
        1
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn stage_name(&self, _stage: usize) -> String {
        "point_mass".into()
    }

    fn reset(&mut self, _stage: usize, seed: u64) -> Result<Vec<f64>> {
        self.x = seeded_rng(seed).random_range(-1.0..1.0);
        self.t = 0;
        self.live = true;
        Ok(vec![self.x])
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStep> {
        if !self.live {
            return Err(Error::contract("point mass: step before reset"));
        }
        let a = action
            .first()
            .copied()
            .ok_or_else(|| Error::contract("point mass: empty action"))?
            .clamp(-1.0, 1.0);
        self.x += self.step_size * a;
        self.t += 1;
        let done = self.t >= self.horizon;
        self.live = !done;
        Ok(EnvStep {
            observation: vec![self.x],
            reward: -self.x.abs(),
            done,
            terminal: false,
            success: false,
            eliminations: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moves_and_times_out() {
        let mut env = PointMass::default();
        let x0 = env.reset(0, 3).unwrap()[0];
        let s = env.step(&[1.0]).unwrap();
        assert!((s.observation[0] - (x0 + 0.1)).abs() < 1e-15);
        assert_eq!(s.reward, -(x0 + 0.1).abs());
        let mut last = s;
        for _ in 1..50 {
            last = env.step(&[0.0]).unwrap();
        }
        assert!(last.done && !last.terminal);
        assert!(env.step(&[0.0]).is_err());
    }
}

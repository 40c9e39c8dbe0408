use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::ControlInput;

/// Normal distribution over the acceleration commands of one group.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GroupControl {
    pub mu_v: f64,
    pub mu_w: f64,
    pub var_v: f64,
    pub var_w: f64,
}

impl GroupControl {
    pub fn new(mu_v: f64, mu_w: f64, var_v: f64, var_w: f64) -> Self {
        Self {
            mu_v,
            mu_w,
            var_v,
            var_w,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.var_v >= 0.0
            && self.var_w >= 0.0
            && [self.mu_v, self.mu_w, self.var_v, self.var_w]
                .iter()
                .all(|x| x.is_finite())
    }
}

/// Draws one agent's commands: `u_v` then `u_w`, independently.
///
/// Two standard-normal draws are always consumed, so the stream position does
/// not depend on whether a variance is zero.
pub fn sample_agent_control<R: Rng + ?Sized>(g: &GroupControl, rng: &mut R) -> ControlInput {
    let zv: f64 = StandardNormal.sample(rng);
    let zw: f64 = StandardNormal.sample(rng);
    ControlInput {
        u_v: g.mu_v + g.var_v.max(0.0).sqrt() * zv,
        u_w: g.mu_w + g.var_w.max(0.0).sqrt() * zw,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn zero_variance_returns_mean() {
        let g = GroupControl::new(2.0, 0.1, 0.0, 0.0);
        let u = sample_agent_control(&g, &mut seeded_rng(3));
        assert_eq!(u, ControlInput::new(2.0, 0.1));
    }

    #[test]
    fn deterministic_per_seed() {
        let g = GroupControl::new(1.0, -0.2, 4.0, 0.3);
        let a = sample_agent_control(&g, &mut seeded_rng(11));
        let b = sample_agent_control(&g, &mut seeded_rng(11));
        assert_eq!(a, b);
    }

    #[test]
    fn sample_mean_converges() {
        let g = GroupControl::new(0.0, 0.0, 1.0, 1.0);
        let mut rng = seeded_rng(5);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| sample_agent_control(&g, &mut rng).u_v)
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 3.0 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn shrinking_variance_approaches_mean() {
        let mut prev = f64::INFINITY;
        for var in [1.0, 1e-2, 1e-4, 1e-8] {
            let g = GroupControl::new(3.0, -1.0, var, var);
            let u = sample_agent_control(&g, &mut seeded_rng(9));
            let dev = (u.u_v - 3.0).abs() + (u.u_w + 1.0).abs();
            assert!(dev < prev);
            prev = dev;
        }
        assert!(prev < 1e-3);
    }
}

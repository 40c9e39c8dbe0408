use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{wrap_angle, SwarmState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VicsekParams {
    /// Alignment radius (m).
    pub radius: f64,
    /// Standard deviation of the heading noise (rad).
    pub noise_std: f64,
    /// Constant forward speed (m/s).
    pub speed: f64,
}

impl VicsekParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !(self.noise_std >= 0.0) || !(self.speed > 0.0) {
            return Err(Error::config(
                "vicsek: radius and speed must be positive, noise_std non-negative",
            ));
        }
        Ok(())
    }
}

/// One Vicsek update: align with neighbours inside the radius, then move.
///
/// Headings are averaged on the circle (atan2 of summed sines and cosines).
/// Neighbourhoods are evaluated on the pre-step state for every agent.
pub fn vicsek_step<R: Rng + ?Sized>(
    swarm: &SwarmState,
    p: &VicsekParams,
    dt: f64,
    rng: &mut R,
) -> SwarmState {
    let r2 = p.radius * p.radius;
    let mut out = swarm.clone();
    for i in swarm.alive_indices() {
        let me = &swarm.agents[i];
        let (mut s, mut c, mut n) = (0.0, 0.0, 0usize);
        for j in swarm.alive_indices() {
            let o = &swarm.agents[j];
            let (dx, dy) = (o.x - me.x, o.y - me.y);
            if dx * dx + dy * dy < r2 {
                s += o.theta.sin();
                c += o.theta.cos();
                n += 1;
            }
        }
        let aligned = if n <= 1 { me.theta } else { s.atan2(c) };
        let z: f64 = StandardNormal.sample(rng);
        let heading = wrap_angle(aligned + p.noise_std * z);
        let a = &mut out.agents[i];
        a.theta = heading;
        a.v = p.speed;
        a.omega = 0.0;
        a.x += p.speed * dt * heading.cos();
        a.y += p.speed * dt * heading.sin();
    }
    out
}

//! Discrete-time unicycle kinematics for individual agents and whole swarms.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Below this angular rate the arc update is replaced by its straight-line limit.
pub const OMEGA_EPS: f64 = 1e-6;

/// Kinematic state of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentState {
    /// East position (m).
    pub x: f64,
    /// North position (m).
    pub y: f64,
    /// Heading (rad), kept in (-pi, pi].
    pub theta: f64,
    /// Forward speed (m/s).
    pub v: f64,
    /// Angular rate (rad/s).
    pub omega: f64,
}

impl AgentState {
    pub fn new(x: f64, y: f64, theta: f64, v: f64, omega: f64) -> Self {
        Self {
            x,
            y,
            theta,
            v,
            omega,
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.theta.is_finite()
            && self.v.is_finite()
            && self.omega.is_finite()
    }
}

/// Acceleration commands for one agent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    /// Forward acceleration (m/s^2).
    pub u_v: f64,
    /// Angular acceleration (rad/s^2).
    pub u_w: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput { u_v: 0.0, u_w: 0.0 };

    pub fn new(u_v: f64, u_w: f64) -> Self {
        Self { u_v, u_w }
    }
}

/// Actuator bounds and the two simulation clocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub v_min: f64,
    pub v_max: f64,
    pub w_min: f64,
    pub w_max: f64,
    /// Simulation substep (s).
    pub dt_sim: f64,
    /// Decision step (s); an integer multiple of `dt_sim`.
    pub dt_rl: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self::table_defaults()
    }
}

impl Limits {
    /// Reference conditions: 30..300 m/s, |omega| <= pi/5, 0.1 s substeps, 1 s decisions.
    pub fn table_defaults() -> Self {
        Self {
            v_min: 30.0,
            v_max: 300.0,
            w_min: -PI / 5.0,
            w_max: PI / 5.0,
            dt_sim: 0.1,
            dt_rl: 1.0,
        }
    }

    /// No speed or rate bounds; used for checking the raw kinematics.
    pub fn unbounded(dt_sim: f64) -> Self {
        Self {
            v_min: f64::NEG_INFINITY,
            v_max: f64::INFINITY,
            w_min: f64::NEG_INFINITY,
            w_max: f64::INFINITY,
            dt_sim,
            dt_rl: dt_sim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_min < self.v_max) {
            return Err(Error::config("limits: v_min must be below v_max"));
        }
        if !(self.w_min < self.w_max) {
            return Err(Error::config("limits: w_min must be below w_max"));
        }
        if !(self.dt_sim > 0.0 && self.dt_sim.is_finite()) {
            return Err(Error::config("limits: dt_sim must be positive"));
        }
        let ratio = self.dt_rl / self.dt_sim;
        if !(ratio >= 1.0) || (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::config(
                "limits: dt_rl must be a positive integer multiple of dt_sim",
            ));
        }
        Ok(())
    }

    /// Simulation substeps per decision step.
    pub fn substeps(&self) -> usize {
        (self.dt_rl / self.dt_sim).round().max(1.0) as usize
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let mut w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w += TAU;
    }
    w
}

/// Clamps speed and angular rate to their bounds and wraps the heading.
pub fn apply_limits(s: AgentState, limits: &Limits) -> AgentState {
    AgentState {
        theta: wrap_angle(s.theta),
        v: s.v.clamp(limits.v_min, limits.v_max),
        omega: s.omega.clamp(limits.w_min, limits.w_max),
        ..s
    }
}

/// Advances one agent by `limits.dt_sim`.
///
/// Speed and rate are updated from the commands and clamped first; the pose
/// then integrates along the exact arc driven by the clamped values. For
/// |omega| below [`OMEGA_EPS`] the arc degenerates to a chord along the
/// mid-step heading, which is the arc's limit to second order.
pub fn step_agent(s: AgentState, u: ControlInput, limits: &Limits) -> AgentState {
    let dt = limits.dt_sim;
    let rates = apply_limits(
        AgentState {
            v: s.v + u.u_v * dt,
            omega: s.omega + u.u_w * dt,
            ..s
        },
        limits,
    );
    let (v, w) = (rates.v, rates.omega);
    let theta0 = s.theta;
    let theta1 = theta0 + w * dt;

    let (x, y) = if w.abs() < OMEGA_EPS {
        let mid = theta0 + 0.5 * w * dt;
        (s.x + v * dt * mid.cos(), s.y + v * dt * mid.sin())
    } else {
        let r = v / w;
        (
            s.x - r * theta0.sin() + r * theta1.sin(),
            s.y + r * theta0.cos() - r * theta1.cos(),
        )
    };

    AgentState {
        x,
        y,
        theta: wrap_angle(theta1),
        v,
        omega: w,
    }
}

/// All agents of one side with their alive flags.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SwarmState {
    pub agents: Vec<AgentState>,
    pub alive: Vec<bool>,
}

impl SwarmState {
    pub fn new(agents: Vec<AgentState>) -> Self {
        let alive = vec![true; agents.len()];
        Self { agents, alive }
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    pub fn alive_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.alive
            .iter()
            .enumerate()
            .filter_map(|(i, &a)| a.then_some(i))
    }

    pub fn alive_positions(&self) -> Vec<[f64; 2]> {
        self.alive_indices()
            .map(|i| self.agents[i].position())
            .collect()
    }
}

/// Advances every alive agent with its own command; dead agents are untouched.
pub fn step_swarm(
    swarm: &SwarmState,
    controls: &[ControlInput],
    limits: &Limits,
) -> Result<SwarmState> {
    if controls.len() != swarm.agents.len() || swarm.alive.len() != swarm.agents.len() {
        return Err(Error::contract(format!(
            "step_swarm: {} agents, {} alive flags, {} controls",
            swarm.agents.len(),
            swarm.alive.len(),
            controls.len()
        )));
    }
    let agents = swarm
        .agents
        .iter()
        .zip(&swarm.alive)
        .zip(controls)
        .map(|((s, &alive), u)| if alive { step_agent(*s, *u, limits) } else { *s })
        .collect();
    Ok(SwarmState {
        agents,
        alive: swarm.alive.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn straight_line_step() {
        let s = AgentState::new(0.0, 0.0, 0.0, 10.0, 0.0);
        let out = step_agent(s, ControlInput::ZERO, &Limits::unbounded(0.1));
        assert_eq!(out, AgentState::new(1.0, 0.0, 0.0, 10.0, 0.0));
    }

    #[test]
    fn half_circle_of_unit_radius() {
        let s = AgentState::new(0.0, 0.0, 0.0, PI, PI);
        let out = step_agent(s, ControlInput::ZERO, &Limits::unbounded(1.0));
        assert_abs_diff_eq!(out.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.y, 2.0, epsilon = 1e-12);
        assert_eq!(out.theta, PI);
        assert_eq!(out.v, PI);
        assert_eq!(out.omega, PI);
    }

    #[test]
    fn speed_saturates_at_v_max() {
        let s = AgentState::new(0.0, 0.0, 0.0, 295.0, 0.0);
        let out = step_agent(s, ControlInput::new(100.0, 0.0), &Limits::table_defaults());
        assert_eq!(out.v, 300.0);
    }

    #[test]
    fn limits_examples() {
        let lim = Limits::table_defaults();
        let slow = apply_limits(AgentState::new(0.0, 0.0, 0.0, 10.0, 0.0), &lim);
        assert_eq!(slow.v, 30.0);
        let spin = apply_limits(AgentState::new(0.0, 0.0, 0.0, 50.0, -0.7), &lim);
        assert_abs_diff_eq!(spin.omega, -PI / 5.0, epsilon = 1e-15);
        let ok = AgentState::new(5.0, -3.0, 1.0, 100.0, 0.1);
        assert_eq!(apply_limits(ok, &lim), ok);
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_abs_diff_eq!(wrap_angle(-PI), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(7.0 * TAU + 0.5), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn full_circle_closes() {
        let w = TAU / 10.0;
        let start = AgentState::new(12.0, -7.0, 0.3, 100.0, w);
        let lim = Limits::unbounded(0.1);
        let mut s = start;
        for _ in 0..100 {
            s = step_agent(s, ControlInput::ZERO, &lim);
        }
        assert!((s.x - start.x).abs() < 1e-9 && (s.y - start.y).abs() < 1e-9);
    }

    #[test]
    fn swarm_edge_cases() {
        let lim = Limits::table_defaults();
        let empty = SwarmState::default();
        assert_eq!(step_swarm(&empty, &[], &lim).unwrap(), empty);

        let mut dead = SwarmState::new(vec![AgentState::new(1.0, 2.0, 0.0, 50.0, 0.0); 3]);
        dead.alive = vec![false; 3];
        let out = step_swarm(&dead, &[ControlInput::new(5.0, 0.1); 3], &lim).unwrap();
        assert_eq!(out, dead);

        let twin = SwarmState::new(vec![AgentState::new(1.0, 2.0, 0.4, 50.0, 0.05); 2]);
        let out = step_swarm(&twin, &[ControlInput::new(3.0, -0.2); 2], &lim).unwrap();
        assert_eq!(out.agents[0], out.agents[1]);

        assert!(matches!(
            step_swarm(&twin, &[ControlInput::ZERO], &lim),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn limits_validation() {
        assert!(Limits::table_defaults().validate().is_ok());
        assert_eq!(Limits::table_defaults().substeps(), 10);
        let bad = Limits {
            dt_rl: 0.25,
            ..Limits::table_defaults()
        };
        assert!(bad.validate().is_err());
    }

    fn agent() -> impl Strategy<Value = AgentState> {
        (
            -1e4..1e4f64,
            -1e4..1e4f64,
            -10.0..10.0f64,
            0.0..400.0f64,
            -2.0..2.0f64,
        )
            .prop_map(|(x, y, t, v, w)| AgentState::new(x, y, t, v, w))
    }

    proptest! {
        #[test]
        fn limits_idempotent(s in agent()) {
            let lim = Limits::table_defaults();
            let once = apply_limits(s, &lim);
            prop_assert_eq!(apply_limits(once, &lim), once);
        }

        #[test]
        fn step_respects_bounds(s in agent(), uv in -500.0..500.0f64, uw in -5.0..5.0f64) {
            let lim = Limits::table_defaults();
            let out = step_agent(apply_limits(s, &lim), ControlInput::new(uv, uw), &lim);
            prop_assert!(out.is_finite());
            prop_assert!(out.v >= lim.v_min && out.v <= lim.v_max);
            prop_assert!(out.theta > -PI && out.theta <= PI);
        }

        #[test]
        fn singularity_is_continuous(theta in -PI..PI, v in 0.0..300.0f64) {
            let lim = Limits::unbounded(0.1);
            let arc = step_agent(AgentState::new(0.0, 0.0, theta, v, OMEGA_EPS), ControlInput::ZERO, &lim);
            let line = step_agent(AgentState::new(0.0, 0.0, theta, v, OMEGA_EPS * 0.999_999), ControlInput::ZERO, &lim);
            prop_assert!(((arc.x - line.x).powi(2) + (arc.y - line.y).powi(2)).sqrt() < 1e-6);
        }
    }
}

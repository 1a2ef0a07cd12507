use serde::{Deserialize, Serialize};

use crate::world::geometry::{wrap_angle, Vec2};
use crate::world::{MAX_ANGULAR_SPEED, MAX_LINEAR_SPEED, ROBOT_RADIUS};

/// Planar pose in the world frame; `theta` is measured counter-clockwise from +x.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: wrap_angle(theta) }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Maps a point given in this pose's body frame (x forward, y left) to the world.
    pub fn transform(&self, local: Vec2) -> Vec2 {
        let (s, c) = self.theta.sin_cos();
        Vec2::new(self.x + c * local.x - s * local.y, self.y + s * local.x + c * local.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose,
    pub v: f64,
    pub omega: f64,
    pub radius: f64,
}

impl RobotState {
    pub fn at(pose: Pose) -> Self {
        Self { pose, v: 0.0, omega: 0.0, radius: ROBOT_RADIUS }
    }
}

/// Velocity command.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub v: f64,
    pub omega: f64,
}

impl Action {
    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    pub fn is_within_limits(&self) -> bool {
        (0.0..=MAX_LINEAR_SPEED).contains(&self.v) && self.omega.abs() <= MAX_ANGULAR_SPEED
    }

    pub fn clamped(&self) -> Self {
        let v = if self.v.is_nan() { 0.0 } else { self.v.clamp(0.0, MAX_LINEAR_SPEED) };
        let omega = if self.omega.is_nan() { 0.0 } else { self.omega.clamp(-MAX_ANGULAR_SPEED, MAX_ANGULAR_SPEED) };
        Self { v, omega }
    }
}

/// Below this turn rate the unicycle is integrated as a straight line.
const STRAIGHT_EPS: f64 = 1e-12;

/// Exact unicycle integration of a constant command over `dt`.
pub fn step_kinematics(state: &RobotState, action: Action, dt: f64) -> RobotState {
    debug_assert!(dt > 0.0);
    let cmd = if action.is_within_limits() {
        action
    } else {
        let c = action.clamped();
        log::warn!("action ({}, {}) outside limits, clamped to ({}, {})", action.v, action.omega, c.v, c.omega);
        c
    };
    let Pose { x, y, theta } = state.pose;
    let dtheta = cmd.omega * dt;
    // chord length of the arc; reduces to v·dt as ω → 0
    let chord = if cmd.omega.abs() > STRAIGHT_EPS {
        2.0 * cmd.v * (0.5 * dtheta).sin() / cmd.omega
    } else {
        cmd.v * dt
    };
    let mid = theta + 0.5 * dtheta;
    RobotState {
        pose: Pose { x: x + chord * mid.cos(), y: y + chord * mid.sin(), theta: wrap_angle(theta + dtheta) },
        v: cmd.v,
        omega: cmd.omega,
        radius: state.radius,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn at(x: f64, y: f64, th: f64) -> RobotState {
        RobotState::at(Pose::new(x, y, th))
    }

    #[test]
    fn zero_command_is_identity() {
        let s = at(1.2, -3.4, 0.7);
        let n = step_kinematics(&s, Action::new(0.0, 0.0), 0.1);
        assert_eq!(n.pose, s.pose);
    }

    #[test]
    fn pure_rotation() {
        let s = at(1.0, 2.0, 0.1);
        let n = step_kinematics(&s, Action::new(0.0, PI / 2.0), 0.1);
        assert!((n.pose.theta - (0.1 + PI / 20.0)).abs() < 1e-15);
        assert_eq!((n.pose.x, n.pose.y), (1.0, 2.0));
    }

    #[test]
    fn pure_translation() {
        let n = step_kinematics(&at(0.0, 0.0, 0.0), Action::new(0.5, 0.0), 0.1);
        assert!((n.pose.x - 0.05).abs() < 1e-15);
        assert_eq!(n.pose.y, 0.0);
        assert_eq!((n.v, n.omega), (0.5, 0.0));
    }

    #[test]
    fn arc_matches_circle_geometry() {
        // quarter circle of radius v/ω
        let (v, w) = (0.5, PI / 2.0);
        let dt = 1.0;
        let n = step_kinematics(&at(0.0, 0.0, 0.0), Action::new(v, w), dt);
        let r = v / w;
        assert!((n.pose.x - r).abs() < 1e-12);
        assert!((n.pose.y - r).abs() < 1e-12);
        assert!((n.pose.theta - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn arc_converges_to_straight_line() {
        let s = at(0.3, 0.4, 0.9);
        let curved = step_kinematics(&s, Action::new(0.5, 1e-6), 0.1);
        let straight = step_kinematics(&s, Action::new(0.5, 0.0), 0.1);
        assert!(curved.pose.position().dist(straight.pose.position()) <= 1e-8);
    }

    #[test]
    fn out_of_range_commands_are_clamped() {
        let n = step_kinematics(&at(0.0, 0.0, 0.0), Action::new(2.0, -9.0), 0.1);
        assert_eq!(n.v, MAX_LINEAR_SPEED);
        assert_eq!(n.omega, -MAX_ANGULAR_SPEED);
    }

    #[test]
    fn deterministic() {
        let s = at(0.123, 4.56, -2.2);
        let a = Action::new(0.31, -0.77);
        let x = step_kinematics(&s, a, 0.1);
        let y = step_kinematics(&s, a, 0.1);
        assert_eq!(x.pose.x.to_bits(), y.pose.x.to_bits());
        assert_eq!(x.pose.y.to_bits(), y.pose.y.to_bits());
        assert_eq!(x.pose.theta.to_bits(), y.pose.theta.to_bits());
    }
}

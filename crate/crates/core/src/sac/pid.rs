use crate::sensing::GoalVelocityState;
use crate::world::{Action, MAX_ANGULAR_SPEED, MAX_LINEAR_SPEED};

/// Proportional gain on the goal bearing.
pub const HEADING_GAIN: f64 = 1.5;

/// Pure-pursuit controller used for the warm-up episodes: turn toward the
/// goal and drive forward in proportion to how well aligned the robot is.
pub fn pid_warmup_action(goal: &GoalVelocityState) -> Action {
    let phi = goal.goal_bearing;
    Action::new(
        MAX_LINEAR_SPEED * phi.cos().max(0.0),
        (HEADING_GAIN * phi).clamp(-MAX_ANGULAR_SPEED, MAX_ANGULAR_SPEED),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn bearing(phi: f64) -> GoalVelocityState {
        GoalVelocityState { goal_distance: 3.0, goal_bearing: phi, v: 0.0, omega: 0.0 }
    }

    #[test]
    fn straight_ahead_and_behind() {
        assert_eq!(pid_warmup_action(&bearing(0.0)), Action::new(0.5, 0.0));
        let back = pid_warmup_action(&bearing(PI));
        assert_eq!(back.v, 0.0);
        assert_eq!(back.omega, MAX_ANGULAR_SPEED);
    }
}

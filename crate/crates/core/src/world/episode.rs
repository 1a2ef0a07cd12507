use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::world::geometry::{point_in_polygon, wrap_angle, Vec2};
use crate::world::kinematics::{step_kinematics, Action, Pose, RobotState};
use crate::world::scenario::{EvalTask, Scenario};
use crate::world::{WorldError, DT, GOAL_RADIUS, MAX_REJECTIONS, MIN_TASK_DISTANCE, ROBOT_RADIUS, SPAWN_MARGIN, T_MAX};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EpisodeStatus {
    Success,
    Crash,
    Timeout,
}

impl EpisodeStatus {
    /// Whether the transition into this status ends the MDP (as opposed to a time limit).
    pub fn is_terminal_state(self) -> bool {
        matches!(self, EpisodeStatus::Success | EpisodeStatus::Crash)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub status: EpisodeStatus,
    /// Number of control steps taken.
    pub steps: usize,
    /// Start state followed by the state after every step.
    pub trajectory: Vec<RobotState>,
}

/// Advances one control period and classifies the result.
///
/// A collision takes precedence over reaching the goal; the time limit only
/// applies when neither happened on the last allowed step.
pub fn episode_step(
    scenario: &Scenario,
    robot: &RobotState,
    goal: Vec2,
    action: Action,
    step_index: usize,
) -> (RobotState, Option<EpisodeStatus>) {
    debug_assert!(step_index < T_MAX);
    let next = step_kinematics(robot, action, DT);
    let pos = next.pose.position();
    let status = if scenario.check_collision(pos, next.radius) {
        Some(EpisodeStatus::Crash)
    } else if pos.dist(goal) <= GOAL_RADIUS {
        Some(EpisodeStatus::Success)
    } else if step_index + 1 >= T_MAX {
        Some(EpisodeStatus::Timeout)
    } else {
        None
    };
    (next, status)
}

/// Goal distance and bearing (robot frame, counter-clockwise positive).
pub fn goal_polar(pose: &Pose, goal: Vec2) -> (f64, f64) {
    let d = goal - pose.position();
    (d.norm(), wrap_angle(d.y.atan2(d.x) - pose.theta))
}

/// Result of one [`Episode::step`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub goal_distance_before: f64,
    pub goal_distance_after: f64,
    pub status: Option<EpisodeStatus>,
}

/// One navigation attempt in a scenario.
#[derive(Clone, Debug)]
pub struct Episode<'a> {
    scenario: &'a Scenario,
    robot: RobotState,
    goal: Vec2,
    step_index: usize,
    trajectory: Vec<RobotState>,
    status: Option<EpisodeStatus>,
}

impl<'a> Episode<'a> {
    pub fn new(scenario: &'a Scenario, start: RobotState, goal: Vec2) -> Self {
        Self { scenario, robot: start, goal, step_index: 0, trajectory: vec![start], status: None }
    }

    pub fn from_task(scenario: &'a Scenario, task: &EvalTask) -> Self {
        let start = RobotState::at(Pose::new(task.start[0], task.start[1], task.start[2]));
        Self::new(scenario, start, Vec2::new(task.goal[0], task.goal[1]))
    }

    pub fn scenario(&self) -> &'a Scenario {
        self.scenario
    }

    pub fn robot(&self) -> &RobotState {
        &self.robot
    }

    pub fn goal(&self) -> Vec2 {
        self.goal
    }

    pub fn steps(&self) -> usize {
        self.step_index
    }

    pub fn status(&self) -> Option<EpisodeStatus> {
        self.status
    }

    pub fn is_done(&self) -> bool {
        self.status.is_some()
    }

    pub fn goal_polar(&self) -> (f64, f64) {
        goal_polar(&self.robot.pose, self.goal)
    }

    /// Applies `action`; panics if the episode already ended.
    pub fn step(&mut self, action: Action) -> StepInfo {
        assert!(self.status.is_none(), "step on a finished episode");
        let before = self.robot.pose.position().dist(self.goal);
        let (next, status) = episode_step(self.scenario, &self.robot, self.goal, action, self.step_index);
        self.robot = next;
        self.step_index += 1;
        self.trajectory.push(next);
        self.status = status;
        StepInfo { goal_distance_before: before, goal_distance_after: next.pose.position().dist(self.goal), status }
    }

    /// Places the robot at `pose` at rest and then takes a zero-velocity step.
    ///
    /// Only meant for harness stubs; it bypasses the kinematic model.
    pub fn teleport(&mut self, pose: Pose) -> StepInfo {
        let before = self.robot.pose.position().dist(self.goal);
        self.robot = RobotState { pose, v: 0.0, omega: 0.0, ..self.robot };
        let info = self.step(Action::new(0.0, 0.0));
        StepInfo { goal_distance_before: before, ..info }
    }

    pub fn trajectory(&self) -> &[RobotState] {
        &self.trajectory
    }

    pub fn outcome(&self) -> Option<EpisodeOutcome> {
        self.status.map(|status| EpisodeOutcome { status, steps: self.step_index, trajectory: self.trajectory.clone() })
    }
}

fn sample_candidate(scenario: &Scenario, rng: &mut impl Rng) -> Vec2 {
    let (lo, hi) = match &scenario.spawn_region {
        Some(region) => region.iter().fold(
            (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY)),
            |(lo, hi), p| (Vec2::new(lo.x.min(p.x), lo.y.min(p.y)), Vec2::new(hi.x.max(p.x), hi.y.max(p.y))),
        ),
        None => (scenario.min, scenario.max),
    };
    Vec2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y))
}

fn acceptable(scenario: &Scenario, p: Vec2, clearance: f64) -> bool {
    if let Some(region) = &scenario.spawn_region {
        if !point_in_polygon(p, region) {
            return false;
        }
    }
    scenario.clearance(p) >= clearance
}

/// Rejection-samples a start state and a goal in free space.
pub fn sample_task(scenario: &Scenario, rng: &mut impl Rng) -> Result<(RobotState, Vec2), WorldError> {
    let clearance = ROBOT_RADIUS + SPAWN_MARGIN;
    let mut attempts = 0usize;
    let mut draw = |rng: &mut _, accept: &dyn Fn(Vec2) -> bool| -> Result<Vec2, WorldError> {
        loop {
            if attempts >= MAX_REJECTIONS {
                return Err(WorldError::SamplingExhausted { scenario: scenario.name.clone(), attempts });
            }
            let p = sample_candidate(scenario, rng);
            if acceptable(scenario, p, clearance) && accept(p) {
                return Ok(p);
            }
            attempts += 1;
        }
    };
    let start = draw(rng, &|_| true)?;
    let goal = draw(rng, &|p| p.dist(start) >= MIN_TASK_DISTANCE)?;
    let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    Ok((RobotState::at(Pose::new(start.x, start.y, theta)), goal))
}

/// A reproducible list of tasks.
pub fn sample_tasks(scenario: &Scenario, n: usize, rng: &mut impl Rng) -> Result<Vec<EvalTask>, WorldError> {
    (0..n)
        .map(|_| {
            sample_task(scenario, rng).map(|(s, g)| EvalTask { start: [s.pose.x, s.pose.y, s.pose.theta], goal: [g.x, g.y] })
        })
        .collect()
}

//! 2D world: polygonal scenarios, differential-drive kinematics, collisions
//! and the episode lifecycle.

pub mod episode;
pub mod geometry;
pub mod kinematics;
pub mod scenario;

pub use episode::{episode_step, goal_polar, sample_task, sample_tasks, Episode, EpisodeOutcome, EpisodeStatus, StepInfo};
pub use geometry::{wrap_angle, Segment, Vec2};
pub use kinematics::{step_kinematics, Action, Pose, RobotState};
pub use scenario::{EvalTask, Scenario, ScenarioFile};

pub const ROBOT_RADIUS: f64 = 0.2;
pub const MAX_LINEAR_SPEED: f64 = 0.5;
pub const MAX_ANGULAR_SPEED: f64 = std::f64::consts::FRAC_PI_2;
/// Control period (s).
pub const DT: f64 = 0.1;
/// Step limit per episode.
pub const T_MAX: usize = 400;
pub const GOAL_RADIUS: f64 = 0.3;
/// Extra clearance over the robot radius required of sampled start and goal points.
pub const SPAWN_MARGIN: f64 = 0.05;
pub const MIN_TASK_DISTANCE: f64 = 1.0;
pub const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorldError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("scenario {scenario}: no free-space sample after {attempts} rejections")]
    SamplingExhausted { scenario: String, attempts: usize },
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("scenario i/o error: {0}")]
    Io(String),
}

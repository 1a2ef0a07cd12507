use serde::{Deserialize, Serialize};

use crate::sensing::lidar::LidarConfig;
use crate::sensing::raycast::{raycast_scan, Scan};
use crate::sensing::repr::{min_downsample, pad_scan_for_fcnet, to_point_set, ObstaclePointSet};
use crate::sensing::{DOWNSAMPLE_M, SensingError};
use crate::world::episode::goal_polar;
use crate::world::geometry::Vec2;
use crate::world::kinematics::RobotState;
use crate::world::scenario::Scenario;

/// Goal distance and bearing in the robot frame plus current velocities.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct GoalVelocityState {
    pub goal_distance: f64,
    pub goal_bearing: f64,
    pub v: f64,
    pub omega: f64,
}

impl GoalVelocityState {
    pub fn of(robot: &RobotState, goal: Vec2) -> Self {
        let (goal_distance, goal_bearing) = goal_polar(&robot.pose, goal);
        Self { goal_distance, goal_bearing, v: robot.v, omega: robot.omega }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.goal_distance, self.goal_bearing, self.v, self.omega]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self { goal_distance: a[0], goal_bearing: a[1], v: a[2], omega: a[3] }
    }
}

/// Everything any actor or critic consumes for one time step.
///
/// The bulky parts are stored in single precision; an observation is kept
/// for every transition in the replay buffer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Encoded obstacle points `(sin α / d, cos α / d)`.
    pub points: Vec<[f32; 2]>,
    /// Reciprocal min-downsampled scan, resampled onto the canonical sensor first.
    pub downsampled: Vec<f32>,
    pub goal: GoalVelocityState,
}

impl Observation {
    pub fn from_parts(points: &ObstaclePointSet, downsampled: &[f64], goal: GoalVelocityState) -> Self {
        Self {
            points: points.points.iter().map(|p| [p[0] as f32, p[1] as f32]).collect(),
            downsampled: downsampled.iter().map(|&v| v as f32).collect(),
            goal,
        }
    }
}

/// Builds observations for a fixed sensor.
#[derive(Clone, Debug)]
pub struct ObservationBuilder {
    pub lidar: LidarConfig,
    pub canonical: LidarConfig,
    /// Downsampling window count; the window length is `canonical beams / m`.
    pub windows: usize,
}

impl ObservationBuilder {
    pub fn new(lidar: LidarConfig) -> Result<Self, SensingError> {
        Self::with_canonical(lidar, LidarConfig::canonical(), DOWNSAMPLE_M)
    }

    pub fn with_canonical(lidar: LidarConfig, canonical: LidarConfig, windows: usize) -> Result<Self, SensingError> {
        lidar.validate()?;
        canonical.validate()?;
        let n = canonical.beam_count();
        if windows == 0 || n < windows {
            return Err(SensingError::Downsample { m: windows, k: 0, n });
        }
        Ok(Self { lidar, canonical, windows })
    }

    pub fn window_len(&self) -> usize {
        self.canonical.beam_count() / self.windows
    }

    pub fn scan(&self, scenario: &Scenario, robot: &RobotState) -> Scan {
        raycast_scan(scenario, &robot.pose, &self.lidar)
    }

    pub fn from_scan(&self, scan: &Scan, robot: &RobotState, goal: Vec2) -> Observation {
        let set = to_point_set(scan, &self.lidar);
        let padded = pad_scan_for_fcnet(scan, &self.lidar, &self.canonical);
        let y = min_downsample(&padded, self.windows, self.window_len()).expect("validated window layout");
        Observation::from_parts(&set, &y, GoalVelocityState::of(robot, goal))
    }

    pub fn observe(&self, scenario: &Scenario, robot: &RobotState, goal: Vec2) -> Observation {
        let scan = self.scan(scenario, robot);
        self.from_scan(&scan, robot, goal)
    }
}

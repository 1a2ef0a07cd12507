//! Simulated LiDAR and the input representations built from its scans.

pub mod lidar;
pub mod observation;
pub mod raycast;
pub mod repr;

pub use lidar::{LidarConfig, Mount};
pub use observation::{GoalVelocityState, Observation, ObservationBuilder};
pub use raycast::{cast_ray, raycast_scan, sensor_pose, Scan};
pub use repr::{decode_point, encode_point, min_downsample, pad_scan_for_fcnet, robot_frame_polar, to_point_set, ObstaclePointSet};

/// Smallest reported range (m); bounds the reciprocal encodings.
pub const D_MIN: f64 = 0.05;
/// Number of downsampled values fed to fully-connected networks.
pub const DOWNSAMPLE_M: usize = 36;
/// Window length of the training sensor (1080 / 36).
pub const DOWNSAMPLE_K: usize = 30;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SensingError {
    #[error("invalid lidar configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot downsample {n} beams into {m} windows of {k}")]
    Downsample { m: usize, k: usize, n: usize },
}

use serde::{Deserialize, Serialize};

use crate::sensing::lidar::LidarConfig;
use crate::sensing::D_MIN;
use crate::world::geometry::Vec2;
use crate::world::kinematics::Pose;
use crate::world::scenario::Scenario;

/// One sweep of range readings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    /// Distances in `[D_MIN, max_range]`, one per beam.
    pub distances: Vec<f64>,
    /// Beam directions in the sensor frame (radians).
    pub beam_angles: Vec<f64>,
    /// Set when the sensor origin was inside an obstacle.
    #[serde(default)]
    pub blocked: bool,
}

impl Scan {
    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }
}

/// World pose of the sensor for a robot at `pose`.
pub fn sensor_pose(pose: &Pose, cfg: &LidarConfig) -> Pose {
    // body frame is (forward, left); the mount is (left = x, forward = y)
    let origin = pose.transform(Vec2::new(cfg.mount.y, cfg.mount.x));
    Pose { x: origin.x, y: origin.y, theta: pose.theta + cfg.mount.phi }
}

/// Distance to the first wall or obstacle edge along one ray, capped at `max_range`.
pub fn cast_ray(scenario: &Scenario, origin: Vec2, direction: f64, max_range: f64) -> f64 {
    let dir = Vec2::from_angle(direction);
    let mut best = max_range;
    for seg in scenario.segments() {
        if let Some(t) = seg.ray_hit(origin, dir) {
            if t < best {
                best = t;
            }
        }
    }
    best.max(D_MIN)
}

pub fn raycast_scan(scenario: &Scenario, pose: &Pose, cfg: &LidarConfig) -> Scan {
    let sensor = sensor_pose(pose, cfg);
    let origin = sensor.position();
    let beam_angles = cfg.beam_angles();
    if scenario.is_occupied(origin) {
        log::warn!("sensor origin ({:.3}, {:.3}) inside an obstacle in {}", origin.x, origin.y, scenario.name);
        return Scan { distances: vec![D_MIN; beam_angles.len()], beam_angles, blocked: true };
    }
    let distances = beam_angles
        .iter()
        .map(|&b| cast_ray(scenario, origin, sensor.theta + b, cfg.max_range))
        .collect();
    Scan { distances, beam_angles, blocked: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::lidar::Mount;

    #[test]
    fn axis_beams_in_empty_room() {
        let room = Scenario::empty_room("room", 8.0, 8.0);
        let cfg = LidarConfig { max_range: 10.0, ..LidarConfig::canonical() };
        let scan = raycast_scan(&room, &Pose::new(4.0, 4.0, 0.0), &cfg);
        assert_eq!(scan.len(), 1080);
        // beam 0 points backwards (−π), 270 right, 540 ahead, 810 left
        for idx in [0, 270, 540, 810] {
            assert!((scan.distances[idx] - 4.0).abs() < 1e-9, "beam {idx}: {}", scan.distances[idx]);
        }
        let short = raycast_scan(&room, &Pose::new(4.0, 4.0, 0.0), &LidarConfig::canonical());
        assert!(short.distances.iter().all(|&d| d <= 5.0));
        assert!((short.distances[540] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn open_beam_reads_max_range() {
        let room = Scenario::empty_room("big", 100.0, 100.0);
        let cfg = LidarConfig::new(90.0, 1.0, 5.0, Mount::default()).unwrap();
        let scan = raycast_scan(&room, &Pose::new(50.0, 50.0, 1.0), &cfg);
        assert!(scan.distances.iter().all(|&d| d == 5.0));
    }

    #[test]
    fn offset_mount_moves_origin() {
        let room = Scenario::empty_room("room", 8.0, 8.0);
        let cfg = LidarConfig::new(360.0, 10.0, 10.0, Mount { x: 0.0, y: 0.5, phi: 0.0 }).unwrap();
        let scan = raycast_scan(&room, &Pose::new(4.0, 4.0, 0.0), &cfg);
        // beam 18 is straight ahead
        assert!((scan.distances[18] - 3.5).abs() < 1e-9);
    }

    #[test]
    fn blocked_sensor_reports_floor() {
        let room = Scenario::empty_room("room", 8.0, 8.0);
        let scan = raycast_scan(&room, &Pose::new(-1.0, 4.0, 0.0), &LidarConfig::canonical());
        assert!(scan.blocked);
        assert!(scan.distances.iter().all(|&d| d == D_MIN));
    }
}

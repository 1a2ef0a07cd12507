//! Network input representations derived from a [`Scan`].

use serde::{Deserialize, Serialize};

use crate::sensing::lidar::LidarConfig;
use crate::sensing::raycast::Scan;
use crate::sensing::{SensingError, D_MIN};
use crate::world::geometry::wrap_angle;

/// Unordered obstacle points in the robot frame.
///
/// Each point is encoded as `(sin α / d, cos α / d)` where `α` is the bearing
/// from the heading axis (counter-clockwise) and `d` the range from the robot
/// center.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstaclePointSet {
    pub points: Vec<[f64; 2]>,
    pub angles: Vec<f64>,
    pub distances: Vec<f64>,
}

impl ObstaclePointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn from_polar(angles: Vec<f64>, distances: Vec<f64>) -> Self {
        let points = angles.iter().zip(&distances).map(|(&a, &d)| encode_point(a, d)).collect();
        Self { points, angles, distances }
    }

    /// Robot-frame Cartesian coordinates `(lateral-left, forward)` of each point.
    pub fn coordinates(&self) -> Vec<[f64; 2]> {
        self.angles.iter().zip(&self.distances).map(|(&a, &d)| [d * a.sin(), d * a.cos()]).collect()
    }
}

#[inline]
pub fn encode_point(alpha: f64, d: f64) -> [f64; 2] {
    let (s, c) = alpha.sin_cos();
    [s / d, c / d]
}

/// Inverse of [`encode_point`]: `(α, d)`.
#[inline]
pub fn decode_point(p: [f64; 2]) -> (f64, f64) {
    (p[0].atan2(p[1]), 1.0 / p[0].hypot(p[1]))
}

/// Bearing and range of every beam endpoint about the robot center.
pub fn robot_frame_polar(scan: &Scan, cfg: &LidarConfig) -> (Vec<f64>, Vec<f64>) {
    let m = cfg.mount;
    if m.is_centered() {
        let angles = scan.beam_angles.iter().map(|&b| wrap_angle(b + m.phi)).collect();
        return (angles, scan.distances.clone());
    }
    scan.beam_angles
        .iter()
        .zip(&scan.distances)
        .map(|(&b, &d)| {
            let dir = b + m.phi;
            let forward = m.y + d * dir.cos();
            let left = m.x + d * dir.sin();
            (left.atan2(forward), forward.hypot(left).max(D_MIN))
        })
        .unzip()
}

pub fn to_point_set(scan: &Scan, cfg: &LidarConfig) -> ObstaclePointSet {
    let (angles, distances) = robot_frame_polar(scan, cfg);
    ObstaclePointSet::from_polar(angles, distances)
}

/// Reciprocal window minimum: `y_i = 1 / min(d[i·k .. i·k + k])`.
pub fn min_downsample(distances: &[f64], m: usize, k: usize) -> Result<Vec<f64>, SensingError> {
    if m == 0 || k == 0 || m * k > distances.len() {
        return Err(SensingError::Downsample { m, k, n: distances.len() });
    }
    Ok(distances
        .chunks_exact(k)
        .take(m)
        .map(|w| 1.0 / w.iter().copied().fold(f64::INFINITY, f64::min))
        .collect())
}

/// Beams whose angular gaps differ by less than this are treated as equally near.
pub const PAD_TIE_EPS: f64 = 1e-9;

fn angular_gap(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Resamples a scan onto the beams of `canonical`.
///
/// Each canonical direction takes the robot-frame range of the nearest real
/// beam within half the sum of the two resolutions; directions the sensor
/// does not cover read the canonical maximum range. Ties go to the lower beam index.
pub fn pad_scan_for_fcnet(scan: &Scan, cfg: &LidarConfig, canonical: &LidarConfig) -> Vec<f64> {
    let (angles, distances) = robot_frame_polar(scan, cfg);
    let canon_angles: Vec<f64> = canonical.beam_angles().iter().map(|&b| wrap_angle(b + canonical.mount.phi)).collect();
    if cfg == canonical {
        return distances.iter().map(|d| d.min(canonical.max_range)).collect();
    }
    let tolerance = 0.5 * (cfg.resolution_deg + canonical.resolution_deg).to_radians();

    let mut order: Vec<usize> = (0..angles.len()).collect();
    order.sort_by(|&a, &b| angles[a].total_cmp(&angles[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| angles[i]).collect();

    canon_angles
        .iter()
        .map(|&target| {
            let pos = sorted.partition_point(|&a| a < target);
            let n = sorted.len();
            // candidates: the two sorted neighbours, wrapped around ±π
            let mut best: Option<(f64, usize)> = None;
            for cand in [pos % n, (pos + n - 1) % n, (pos + 1) % n, (pos + n - 2) % n] {
                let idx = order[cand];
                let gap = angular_gap(angles[idx], target);
                let better = match best {
                    None => true,
                    Some((g, i)) => gap < g - PAD_TIE_EPS || ((gap - g).abs() <= PAD_TIE_EPS && idx < i),
                };
                if better {
                    best = Some((gap, idx));
                }
            }
            // near-equal angles further along the sorted order can only matter for ties
            let (gap, mut idx) = best.expect("nonempty scan");
            for step in [1, n - 1] {
                let mut j = (pos + step) % n;
                for _ in 0..n {
                    if (angular_gap(sorted[j], target) - gap).abs() > PAD_TIE_EPS {
                        break;
                    }
                    idx = idx.min(order[j]);
                    j = (j + step) % n;
                }
            }
            if gap <= tolerance {
                distances[idx].min(canonical.max_range)
            } else {
                canonical.max_range
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::lidar::Mount;
    use std::f64::consts::FRAC_PI_2;

    fn scan_of(cfg: &LidarConfig, f: impl Fn(usize) -> f64) -> Scan {
        let beam_angles = cfg.beam_angles();
        Scan { distances: (0..beam_angles.len()).map(f).collect(), beam_angles, blocked: false }
    }

    #[test]
    fn centered_encodings() {
        assert_eq!(encode_point(0.0, 2.0), [0.0, 0.5]);
        let p = encode_point(FRAC_PI_2, 0.5);
        assert!((p[0] - 2.0).abs() < 1e-15 && p[1].abs() < 1e-15);
    }

    #[test]
    fn forward_offset_mount() {
        let cfg = LidarConfig::new(360.0, 10.0, 5.0, Mount { x: 0.0, y: 0.15, phi: 0.0 }).unwrap();
        let scan = scan_of(&cfg, |_| 1.0);
        let set = to_point_set(&scan, &cfg);
        // beam 18 is straight ahead
        assert!(set.angles[18].abs() < 1e-12);
        assert!((set.distances[18] - 1.15).abs() < 1e-12);
        assert!(set.points[18][0].abs() < 1e-12);
        assert!((set.points[18][1] - 1.0 / 1.15).abs() < 1e-12);
    }

    #[test]
    fn centered_mount_keeps_beam_angles() {
        let cfg = LidarConfig::canonical();
        let scan = scan_of(&cfg, |i| 0.5 + i as f64 * 0.001);
        let set = to_point_set(&scan, &cfg);
        for (a, b) in set.angles.iter().zip(&scan.beam_angles) {
            assert_eq!(a, &wrap_angle(*b));
        }
        assert_eq!(set.distances, scan.distances);
    }

    #[test]
    fn downsample_cases() {
        let y = min_downsample(&vec![5.0; 1080], 36, 30).unwrap();
        assert!(y.iter().all(|&v| v == 0.2));
        let mut d = vec![4.0; 30];
        d[0] = 2.0;
        d[1] = 0.5;
        assert_eq!(min_downsample(&d, 1, 30).unwrap(), vec![2.0]);
        assert!(min_downsample(&d, 2, 30).is_err());
        // trailing beams are ignored
        let mut d = vec![1.0; 31];
        d[30] = 0.1;
        assert_eq!(min_downsample(&d, 1, 30).unwrap(), vec![1.0]);
    }

    #[test]
    fn padding_identity_and_rear_fill() {
        let canon = LidarConfig::canonical();
        let scan = scan_of(&canon, |i| 0.3 + (i % 17) as f64 * 0.2);
        assert_eq!(pad_scan_for_fcnet(&scan, &canon, &canon), scan.distances);

        let front = LidarConfig::new(180.0, 1.0, 5.0, Mount::default()).unwrap();
        let padded = pad_scan_for_fcnet(&scan_of(&front, |_| 1.0), &front, &canon);
        let angles = canon.beam_angles();
        for (a, d) in angles.iter().zip(&padded) {
            if a.abs() > FRAC_PI_2 + 0.02 {
                assert_eq!(*d, 5.0);
            } else if a.abs() < FRAC_PI_2 {
                assert_eq!(*d, 1.0);
            }
        }
    }

    #[test]
    fn long_range_readings_clamped_to_canonical_range() {
        let canon = LidarConfig::canonical();
        let cfg = LidarConfig::new(270.0, 0.25, 30.0, Mount::default()).unwrap();
        let padded = pad_scan_for_fcnet(&scan_of(&cfg, |_| 20.0), &cfg, &canon);
        assert!(padded.iter().all(|&d| d == 5.0));
    }
}

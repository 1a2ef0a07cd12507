use serde::{Deserialize, Serialize};

use crate::sensing::SensingError;

/// Sensor mount in the robot frame: `x` lateral (positive to the left),
/// `y` forward along the heading, `phi` yaw (counter-clockwise).
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Mount {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

impl Mount {
    pub fn is_centered(&self) -> bool {
        self.x == 0.0 && self.y == 0.0
    }
}

/// Range sensor specification and mount pose.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LidarConfig {
    /// Field of view (degrees).
    pub fov_deg: f64,
    /// Nominal angular resolution (degrees).
    pub resolution_deg: f64,
    /// Maximum range (m).
    pub max_range: f64,
    pub mount: Mount,
    /// Explicit beam count for sensors whose nominal resolution does not
    /// divide the field of view evenly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam_override: Option<usize>,
}

impl LidarConfig {
    pub fn new(fov_deg: f64, resolution_deg: f64, max_range: f64, mount: Mount) -> Result<Self, SensingError> {
        let cfg = Self { fov_deg, resolution_deg, max_range, mount, beam_override: None };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The training sensor: 360°, 1080 beams, 5 m, centered.
    pub fn canonical() -> Self {
        Self {
            fov_deg: 360.0,
            resolution_deg: 0.33,
            max_range: 5.0,
            mount: Mount::default(),
            beam_override: Some(1080),
        }
    }

    pub fn with_beam_count(mut self, n: usize) -> Self {
        self.beam_override = Some(n);
        self
    }

    pub fn validate(&self) -> Result<(), SensingError> {
        let bad = |m: String| Err(SensingError::InvalidConfig(m));
        if !(self.fov_deg > 0.0 && self.fov_deg <= 360.0) {
            return bad(format!("field of view {} outside (0, 360]", self.fov_deg));
        }
        if !(self.resolution_deg > 0.0) {
            return bad(format!("angular resolution {} must be positive", self.resolution_deg));
        }
        if !(self.max_range > 0.0) || !self.max_range.is_finite() {
            return bad(format!("max range {} must be positive", self.max_range));
        }
        if self.beam_count() < 1 {
            return bad("configuration yields no beams".into());
        }
        if ![self.mount.x, self.mount.y, self.mount.phi].iter().all(|v| v.is_finite()) {
            return bad("mount pose must be finite".into());
        }
        Ok(())
    }

    /// `round(fov / resolution)` unless overridden.
    pub fn beam_count(&self) -> usize {
        self.beam_override.unwrap_or_else(|| (self.fov_deg / self.resolution_deg).round() as usize)
    }

    pub fn is_full_circle(&self) -> bool {
        self.fov_deg >= 360.0
    }

    /// Angular spacing between adjacent beams (radians).
    pub fn beam_spacing(&self) -> f64 {
        let n = self.beam_count();
        let fov = self.fov_deg.to_radians();
        if self.is_full_circle() {
            fov / n as f64
        } else if n > 1 {
            fov / (n - 1) as f64
        } else {
            0.0
        }
    }

    /// Beam directions in the sensor frame (radians, counter-clockwise from the sensor axis).
    ///
    /// A full circle starts at −π and never repeats +π; a partial field of
    /// view includes both edges `±fov/2`.
    pub fn beam_angles(&self) -> Vec<f64> {
        let n = self.beam_count();
        let half = 0.5 * self.fov_deg.to_radians();
        if n == 1 && !self.is_full_circle() {
            return vec![0.0];
        }
        let step = self.beam_spacing();
        (0..n).map(|i| -half + i as f64 * step).collect()
    }
}

use crate::eval::EvalError;
use crate::sensing::{LidarConfig, Mount};

/// Labels of the sensor setups used for cross-configuration evaluation,
/// with the beam count of each where it differs from `round(fov / res)`.
pub const PRESETS: [(&str, Option<usize>); 7] = [
    ("180|20|10|0", None),
    ("180|20|10|0.15", None),
    ("180|20|10|-0.15", None),
    ("240|0.47|5.6|0", Some(512)),
    ("270|0.25|30|0", None),
    ("360|0.33|5|0", Some(1080)),
    ("360|10|5|0", None),
];

pub const LABEL_GRAMMAR: &str = "fov_deg|resolution_deg|max_range_m|mount_forward_offset_m";

/// Parses `"fov|res|range|y"`; preset labels carry their beam-count override.
pub fn parse_lidar_label(label: &str) -> Result<LidarConfig, EvalError> {
    let bad = |why: &str| EvalError::Label(format!("{label:?}: {why}; expected {LABEL_GRAMMAR}"));
    let fields: Vec<&str> = label.trim().split('|').collect();
    if fields.len() != 4 {
        return Err(bad("wrong number of fields"));
    }
    let mut vals = [0.0; 4];
    for (v, f) in vals.iter_mut().zip(&fields) {
        *v = f.trim().parse::<f64>().map_err(|_| bad(&format!("{f:?} is not a number")))?;
    }
    let cfg = LidarConfig::new(vals[0], vals[1], vals[2], Mount { x: 0.0, y: vals[3], phi: 0.0 })
        .map_err(|e| bad(&e.to_string()))?;
    let normalized = format_lidar_label(&cfg);
    Ok(match PRESETS.iter().find(|(l, _)| *l == normalized) {
        Some((_, Some(n))) => cfg.with_beam_count(*n),
        _ => cfg,
    })
}

pub fn format_lidar_label(cfg: &LidarConfig) -> String {
    format!("{}|{}|{}|{}", cfg.fov_deg, cfg.resolution_deg, cfg.max_range, cfg.mount.y + 0.0)
}

pub fn preset_labels() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(l, _)| *l)
}

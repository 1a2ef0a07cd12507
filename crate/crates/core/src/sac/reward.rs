use serde::{Deserialize, Serialize};

use crate::world::EpisodeStatus;

/// Terminal rewards and the dense progress shaping.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub success: f64,
    pub crash: f64,
    /// Scale on the per-step decrease of goal distance.
    pub progress_scale: f64,
    /// Constant added every non-terminal step; negative to penalize idling.
    pub step_penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { success: 10.0, crash: -10.0, progress_scale: 5.0, step_penalty: -0.05 }
    }
}

impl RewardConfig {
    /// Reward for a step that moved the goal distance from `before` to `after`.
    ///
    /// A timeout is scored like any other non-terminal step.
    pub fn compute(&self, before: f64, after: f64, status: Option<EpisodeStatus>) -> f64 {
        match status {
            Some(EpisodeStatus::Success) => self.success,
            Some(EpisodeStatus::Crash) => self.crash,
            _ => self.progress_scale * (before - after) + self.step_penalty,
        }
    }
}

pub fn compute_reward(before: f64, after: f64, status: Option<EpisodeStatus>) -> f64 {
    RewardConfig::default().compute(before, after, status)
}

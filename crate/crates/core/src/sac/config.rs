use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::models::{ActorKind, CriticKind, ModelConfig};
use crate::sac::curriculum::CurriculumConfig;
use crate::sac::reward::RewardConfig;
use crate::sac::update::SacHyper;
use crate::sac::SacError;

/// Floating-point type used for the networks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

/// Everything a training run needs; every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub tau: f64,
    /// Environment steps.
    pub total_steps: u64,
    /// Transitions collected before the first update.
    pub min_replay: usize,
    /// Leading episodes driven by the warm-up controller.
    pub warmup_episodes: u64,
    pub reward: RewardConfig,
    pub curriculum: CurriculumConfig,
    pub actor: ActorKind,
    pub critic: CriticKind,
    pub model: ModelConfig,
    pub precision: Precision,
    /// Sensor label used for training.
    pub lidar: String,
    /// Training scenario files (relative paths resolve against the config file).
    pub scenarios: Vec<PathBuf>,
    pub heldout: Vec<PathBuf>,
    /// Steps between evaluations on the training scenarios' fixed tasks (0 disables).
    pub eval_interval: u64,
    /// Steps between evaluations on the held-out scenarios (0 disables).
    pub heldout_interval: u64,
    pub heldout_tasks: usize,
    pub heldout_seed: u64,
    /// Steps between checkpoints (0 writes only the final one).
    pub checkpoint_interval: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            alpha: 0.2,
            lr: 3e-4,
            batch_size: 256,
            replay_capacity: 500_000,
            tau: 0.005,
            total_steps: 500_000,
            min_replay: 1000,
            warmup_episodes: 100,
            reward: RewardConfig::default(),
            curriculum: CurriculumConfig::default(),
            actor: ActorKind::Spn,
            critic: CriticKind::Spn,
            model: ModelConfig::default(),
            precision: Precision::F64,
            lidar: "360|0.33|5|0".into(),
            scenarios: Vec::new(),
            heldout: Vec::new(),
            eval_interval: 5000,
            heldout_interval: 25_000,
            heldout_tasks: 100,
            heldout_seed: 1,
            checkpoint_interval: 0,
        }
    }
}

impl TrainConfig {
    pub fn hyper(&self) -> SacHyper {
        SacHyper { gamma: self.gamma, alpha: self.alpha, tau: self.tau }
    }

    pub fn validate(&self) -> Result<(), SacError> {
        let bad = |m: &str| Err(SacError::Config(m.into()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.alpha >= 0.0) {
            return bad("alpha must be non-negative");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if !(self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if self.batch_size == 0 || self.replay_capacity == 0 || self.min_replay == 0 {
            return bad("batch_size, replay_capacity and min_replay must be positive");
        }
        let c = &self.curriculum;
        if c.initial.is_empty() || c.window == 0 || ((c.initial.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return bad("curriculum probabilities must sum to 1 over a positive window");
        }
        self.model.validate().map_err(|e| SacError::Config(e.to_string()))?;
        Ok(())
    }

    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self, SacError> {
        let cfg: Self = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| SacError::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| SacError::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves scenario paths against its directory.
    pub fn load(path: &Path) -> Result<Self, SacError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| SacError::Io { path: path.display().to_string(), source })?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in cfg.scenarios.iter_mut().chain(cfg.heldout.iter_mut()) {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

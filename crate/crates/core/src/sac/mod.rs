//! Soft actor-critic training: rewards, replay, the update rule, the scenario
//! curriculum, the warm-up controller and the training loop.

pub mod config;
pub mod curriculum;
pub mod pid;
pub mod replay;
pub mod reward;
pub mod train;
pub mod update;

pub use config::TrainConfig;
pub use curriculum::{curriculum_update, CurriculumConfig, CurriculumState};
pub use pid::pid_warmup_action;
pub use replay::{ReplayBuffer, SharedReplay, Transition};
pub use reward::{compute_reward, RewardConfig};
pub use train::{train_loop, MetricRecord, TrainOutput, Trainer};
pub use update::{LossReport, SacAgent, SacHyper};

use crate::eval::EvalError;
use crate::models::ModelError;
use crate::nn::NnError;
use crate::sensing::SensingError;
use crate::world::WorldError;

#[derive(Debug, thiserror::Error)]
pub enum SacError {
    #[error("training configuration: {0}")]
    Config(String),
    #[error("sample from an empty replay buffer")]
    EmptyReplay,
    #[error("training fault: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Sensing(#[from] SensingError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

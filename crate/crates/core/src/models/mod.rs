//! Network architectures: the SPN actor and its baselines, both critic
//! families, and the squashed-Gaussian policy head.

pub mod actor;
pub mod batch;
pub mod config;
pub mod critic;
pub mod extractor;
pub mod mlp;
pub mod policy;

pub use actor::{multiplicity, Actor, ActorOutput, ActorVars};
pub use batch::{PointBatch, StateBatch};
pub use config::{ActorKind, CriticKind, ModelConfig};
pub use critic::{CriticFeatures, Critics};
pub use extractor::{Extracted, PointExtractor};
pub use mlp::Mlp;
pub use policy::{deterministic_action, log_prob, sample_action, sample_in_graph, PolicySample};

use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("model configuration: {0}")]
    Config(String),
    #[error("model kind mismatch: {0}")]
    KindMismatch(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

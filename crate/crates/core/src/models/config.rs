use serde::{Deserialize, Serialize};

use crate::sensing::DOWNSAMPLE_M;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorKind {
    /// Goal-gated point-set actor.
    Spn,
    /// Fully-connected actor over the downsampled scan.
    FcNet,
    /// Ungated point-set actor over raw point coordinates.
    PointNet,
}

impl ActorKind {
    /// Identifier stored in weight files.
    pub fn model_kind(self) -> &'static str {
        match self {
            ActorKind::Spn => "spn_actor",
            ActorKind::FcNet => "fcnet",
            ActorKind::PointNet => "pointnet",
        }
    }

    pub fn from_model_kind(s: &str) -> Option<Self> {
        match s {
            "spn_actor" => Some(ActorKind::Spn),
            "fcnet" => Some(ActorKind::FcNet),
            "pointnet" => Some(ActorKind::PointNet),
            _ => None,
        }
    }

    pub fn uses_points(self) -> bool {
        !matches!(self, ActorKind::FcNet)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticKind {
    /// Three independent MLPs over the downsampled scan.
    Spn,
    /// One gated point extractor shared by the value and both Q heads.
    SpnV2,
}

impl CriticKind {
    pub fn model_kind(self) -> &'static str {
        match self {
            CriticKind::Spn => "spn_critic",
            CriticKind::SpnV2 => "spnv2_critic",
        }
    }

    pub fn from_model_kind(s: &str) -> Option<Self> {
        match s {
            "spn_critic" => Some(CriticKind::Spn),
            "spnv2_critic" => Some(CriticKind::SpnV2),
            _ => None,
        }
    }
}

/// Layer sizes for every architecture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Global feature count (pooled channels).
    #[serde(rename = "K")]
    pub k: usize,
    /// Width of the per-point and gate layers.
    #[serde(rename = "H")]
    pub h: usize,
    /// Hidden widths of the policy head and the SPN-v2 critic heads.
    pub head: Vec<usize>,
    /// Hidden widths of FC-Net and of the downsampled-scan critics.
    pub fc_hidden: Vec<usize>,
    /// Length of the downsampled scan.
    pub downsample_m: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { k: 20, h: 64, head: vec![128, 128], fc_hidden: vec![256, 256], downsample_m: DOWNSAMPLE_M }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), crate::models::ModelError> {
        if self.k == 0 || self.h == 0 || self.downsample_m == 0 {
            return Err(crate::models::ModelError::Config("K, H and downsample_m must be positive".into()));
        }
        if self.head.contains(&0) || self.fc_hidden.contains(&0) {
            return Err(crate::models::ModelError::Config("layer widths must be positive".into()));
        }
        Ok(())
    }
}

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::models::batch::StateBatch;
use crate::models::config::{ActorKind, ModelConfig};
use crate::models::extractor::PointExtractor;
use crate::models::mlp::Mlp;
use crate::models::policy::{LOG_STD_MAX, LOG_STD_MIN};
use crate::models::ModelError;
use crate::nn::{weights, Bound, Graph, NnError, ParamSet, Var};
use crate::scalar::Scalar;

/// Policy statistics for one state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActorOutput {
    pub mean: [f64; 2],
    pub log_std: [f64; 2],
    /// Support point of each pooled channel (empty for FC-Net).
    pub support_indices: Vec<usize>,
    /// Number of channels each support point supplies.
    pub support_multiplicity: BTreeMap<usize, usize>,
}

impl ActorOutput {
    pub fn distinct_support(&self) -> usize {
        self.support_multiplicity.len()
    }
}

pub fn multiplicity(indices: &[usize]) -> BTreeMap<usize, usize> {
    let mut m = BTreeMap::new();
    for &i in indices {
        *m.entry(i).or_insert(0) += 1;
    }
    m
}

/// Tape handles of an actor forward pass.
pub struct ActorVars {
    pub mean: Var,
    pub log_std: Var,
    pub support: Option<Vec<Vec<usize>>>,
}

/// Any of the three policy networks.
#[derive(Clone, Debug)]
pub struct Actor<T> {
    pub kind: ActorKind,
    pub config: ModelConfig,
    pub params: ParamSet<T>,
    extractor: Option<PointExtractor>,
    head: Mlp,
}

impl<T: Scalar> Actor<T> {
    pub fn new(kind: ActorKind, config: ModelConfig, rng: &mut impl Rng) -> Result<Self, ModelError> {
        config.validate()?;
        let mut params = ParamSet::new();
        let (extractor, input) = match kind {
            ActorKind::Spn | ActorKind::PointNet => {
                let gated = kind == ActorKind::Spn;
                let ext = PointExtractor::build(&mut params, "extract", config.h, config.k, gated, rng);
                (Some(ext), config.k + 4)
            }
            ActorKind::FcNet => (None, config.downsample_m + 4),
        };
        let hidden = match kind {
            ActorKind::FcNet => &config.fc_hidden,
            _ => &config.head,
        };
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(4);
        // log-std outputs start at −1
        let head = Mlp::build(&mut params, "head", &sizes, Some(&[0.0, 0.0, -1.0, -1.0]), rng);
        Ok(Self { kind, config, params, extractor, head })
    }

    pub fn extractor(&self) -> Option<&PointExtractor> {
        self.extractor.as_ref()
    }

    pub fn head(&self) -> &Mlp {
        &self.head
    }

    /// Records the forward pass. With `prune`, only support points enter the tape.
    pub fn forward(
        &self,
        g: &mut Graph<T>,
        bound: &Bound,
        batch: &StateBatch<T>,
        prune: bool,
    ) -> Result<ActorVars, NnError> {
        let goal = g.input(batch.goal.clone());
        let (features, support) = match (&self.extractor, self.kind) {
            (Some(ext), kind) => {
                let converted;
                let points = if kind == ActorKind::PointNet {
                    converted = batch.points.to_coordinates();
                    &converted
                } else {
                    &batch.points
                };
                let out = if prune {
                    ext.forward_pruned(g, bound, &self.params, points, goal)?
                } else {
                    ext.forward(g, bound, points, goal)?
                };
                (g.concat_cols(&[out.pooled, goal])?, Some(out.support))
            }
            (None, _) => {
                let y = g.input(batch.downsampled.clone());
                (g.concat_cols(&[y, goal])?, None)
            }
        };
        let out = self.head.forward(g, bound, features)?;
        let mean = g.slice_cols(out, 0, 2)?;
        let raw_log_std = g.slice_cols(out, 2, 2)?;
        let log_std = g.clamp(raw_log_std, T::of(LOG_STD_MIN), T::of(LOG_STD_MAX));
        Ok(ActorVars { mean, log_std, support })
    }

    /// Policy statistics for every sample, without gradients.
    pub fn infer(&self, batch: &StateBatch<T>) -> Result<Vec<ActorOutput>, NnError> {
        let mut g = Graph::new();
        let bound = self.params.bind_frozen(&mut g);
        let vars = self.forward(&mut g, &bound, batch, true)?;
        let (mean, log_std) = (g.value(vars.mean), g.value(vars.log_std));
        Ok((0..batch.samples())
            .map(|s| {
                let support_indices = vars.support.as_ref().map(|sp| sp[s].clone()).unwrap_or_default();
                ActorOutput {
                    mean: [mean.get(s, 0).as_f64(), mean.get(s, 1).as_f64()],
                    log_std: [log_std.get(s, 0).as_f64(), log_std.get(s, 1).as_f64()],
                    support_multiplicity: multiplicity(&support_indices),
                    support_indices,
                }
            })
            .collect())
    }

    pub fn infer_one(&self, batch: &StateBatch<T>) -> Result<ActorOutput, NnError> {
        Ok(self.infer(batch)?.remove(0))
    }

    pub fn save(&self, out: impl Write) -> Result<(), ModelError> {
        let cfg = serde_json::to_value(&self.config).map_err(|e| ModelError::Config(e.to_string()))?;
        weights::write_weights(out, self.kind.model_kind(), self.config.k, self.config.h, cfg, &self.params)?;
        Ok(())
    }

    pub fn load(input: impl Read) -> Result<Self, ModelError> {
        let (header, layers) = weights::read_weights(input)?;
        let kind = ActorKind::from_model_kind(&header.model_kind)
            .ok_or_else(|| ModelError::KindMismatch(format!("{} is not an actor", header.model_kind)))?;
        let config: ModelConfig =
            serde_json::from_value(header.config).map_err(|e| ModelError::Config(e.to_string()))?;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut actor = Self::new(kind, config, &mut rng)?;
        weights::load_into(&mut actor.params, &layers)?;
        Ok(actor)
    }
}

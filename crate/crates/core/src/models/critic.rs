use std::io::{Read, Write};

use rand::Rng;

use crate::models::batch::StateBatch;
use crate::models::config::{CriticKind, ModelConfig};
use crate::models::extractor::PointExtractor;
use crate::models::mlp::Mlp;
use crate::models::ModelError;
use crate::nn::{weights, Bound, Graph, NnError, ParamId, ParamSet, Tensor, Var};
use crate::scalar::Scalar;

/// Layout of a value network plus any number of Q heads.
#[derive(Clone, Debug)]
struct CriticNet {
    kind: CriticKind,
    extractor: Option<PointExtractor>,
    value: Mlp,
    q: Vec<Mlp>,
}

impl CriticNet {
    fn build<T: Scalar>(
        kind: CriticKind,
        config: &ModelConfig,
        q_heads: usize,
        params: &mut ParamSet<T>,
        rng: &mut impl Rng,
    ) -> Self {
        let (extractor, state_dim, hidden) = match kind {
            CriticKind::Spn => (None, config.downsample_m + 4, &config.fc_hidden),
            CriticKind::SpnV2 => {
                let ext = PointExtractor::build(params, "extract", config.h, config.k, true, rng);
                (Some(ext), config.k + 4, &config.head)
            }
        };
        let sizes = |input: usize| {
            let mut s = vec![input];
            s.extend_from_slice(hidden);
            s.push(1);
            s
        };
        let value = Mlp::build(params, "value", &sizes(state_dim), None, rng);
        let q = (0..q_heads).map(|i| Mlp::build(params, &format!("q{}", i + 1), &sizes(state_dim + 2), None, rng)).collect();
        Self { kind, extractor, value, q }
    }

    fn features<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        bound: &Bound,
        params: &ParamSet<T>,
        batch: &StateBatch<T>,
        prune: bool,
    ) -> Result<Var, NnError> {
        let goal = g.input(batch.goal.clone());
        match (&self.extractor, self.kind) {
            (Some(ext), _) => {
                let out = if prune {
                    ext.forward_pruned(g, bound, params, &batch.points, goal)?
                } else {
                    ext.forward(g, bound, &batch.points, goal)?
                };
                g.concat_cols(&[out.pooled, goal])
            }
            (None, _) => {
                let y = g.input(batch.downsampled.clone());
                g.concat_cols(&[y, goal])
            }
        }
    }
}

/// Value network, two Q networks and a Polyak-averaged target value network.
#[derive(Clone, Debug)]
pub struct Critics<T> {
    pub kind: CriticKind,
    pub config: ModelConfig,
    pub params: ParamSet<T>,
    pub target: ParamSet<T>,
    net: CriticNet,
    target_net: CriticNet,
    /// Source parameter of each target parameter.
    target_source: Vec<ParamId>,
}

/// Tape handle of the shared state features.
#[derive(Clone, Copy, Debug)]
pub struct CriticFeatures(pub Var);

impl<T: Scalar> Critics<T> {
    pub fn new(kind: CriticKind, config: ModelConfig, rng: &mut impl Rng) -> Result<Self, ModelError> {
        config.validate()?;
        let mut params = ParamSet::new();
        let net = CriticNet::build(kind, &config, 2, &mut params, rng);
        let mut target = ParamSet::new();
        let target_net = CriticNet::build(kind, &config, 0, &mut target, rng);
        let target_source = target
            .iter()
            .map(|p| params.by_name(&p.name).expect("target layer exists in source"))
            .collect();
        let mut critics = Self { kind, config, params, target, net, target_net, target_source };
        critics.sync_target(T::one());
        Ok(critics)
    }

    /// `target ← tau · value-path + (1 − tau) · target`.
    pub fn sync_target(&mut self, tau: T) {
        for (dst, &src) in self.target.iter_mut().zip(&self.target_source) {
            let s = self.params.value(src);
            for (d, &v) in dst.value.data_mut().iter_mut().zip(s.data()) {
                *d = tau * v + (T::one() - tau) * *d;
            }
        }
    }

    /// Squared distance between the target and the live value path.
    pub fn target_gap(&self) -> f64 {
        self.target
            .iter()
            .zip(&self.target_source)
            .flat_map(|(t, &s)| t.value.data().iter().zip(self.params.value(s).data()))
            .map(|(a, b)| (a.as_f64() - b.as_f64()).powi(2))
            .sum()
    }

    pub fn features(
        &self,
        g: &mut Graph<T>,
        bound: &Bound,
        batch: &StateBatch<T>,
        prune: bool,
    ) -> Result<CriticFeatures, NnError> {
        self.net.features(g, bound, &self.params, batch, prune).map(CriticFeatures)
    }

    /// `B × 1` state values.
    pub fn value(&self, g: &mut Graph<T>, bound: &Bound, feat: CriticFeatures) -> Result<Var, NnError> {
        self.net.value.forward(g, bound, feat.0)
    }

    /// `B × 1` action values from Q network `which` (0 or 1).
    pub fn q(&self, g: &mut Graph<T>, bound: &Bound, feat: CriticFeatures, action: Var, which: usize) -> Result<Var, NnError> {
        let x = g.concat_cols(&[feat.0, action])?;
        self.net.q[which].forward(g, bound, x)
    }

    /// Target value network on `batch`, without gradients.
    pub fn target_value(&self, batch: &StateBatch<T>) -> Result<Tensor<T>, NnError> {
        let mut g = Graph::new();
        let bound = self.target.bind_frozen(&mut g);
        let feat = self.target_net.features(&mut g, &bound, &self.target, batch, true)?;
        let v = self.target_net.value.forward(&mut g, &bound, feat)?;
        Ok(g.value(v).clone())
    }

    /// Values of `V`, `Q₁`, `Q₂` for scaled actions `actions` (`B × 2`), without gradients.
    pub fn evaluate(&self, batch: &StateBatch<T>, actions: &Tensor<T>) -> Result<[Tensor<T>; 3], NnError> {
        let mut g = Graph::new();
        let bound = self.params.bind_frozen(&mut g);
        let feat = self.features(&mut g, &bound, batch, true)?;
        let a = g.input(actions.clone());
        let v = self.value(&mut g, &bound, feat)?;
        let q1 = self.q(&mut g, &bound, feat, a, 0)?;
        let q2 = self.q(&mut g, &bound, feat, a, 1)?;
        Ok([g.value(v).clone(), g.value(q1).clone(), g.value(q2).clone()])
    }

    pub fn extractor(&self) -> Option<&PointExtractor> {
        self.net.extractor.as_ref()
    }

    pub fn save(&self, out: impl Write) -> Result<(), ModelError> {
        let cfg = serde_json::to_value(&self.config).map_err(|e| ModelError::Config(e.to_string()))?;
        let mut all = self.params.clone();
        for p in self.target.iter() {
            all.add(format!("target.{}", p.name), p.value.clone());
        }
        weights::write_weights(out, self.kind.model_kind(), self.config.k, self.config.h, cfg, &all)?;
        Ok(())
    }

    pub fn load(input: impl Read) -> Result<Self, ModelError> {
        let (header, layers) = weights::read_weights(input)?;
        let kind = CriticKind::from_model_kind(&header.model_kind)
            .ok_or_else(|| ModelError::KindMismatch(format!("{} is not a critic", header.model_kind)))?;
        let config: ModelConfig =
            serde_json::from_value(header.config).map_err(|e| ModelError::Config(e.to_string()))?;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut critics = Self::new(kind, config, &mut rng)?;
        let n = critics.params.len();
        if layers.len() != n + critics.target.len() {
            return Err(ModelError::Nn(NnError::Format("critic layer count mismatch".into())));
        }
        weights::load_into(&mut critics.params, &layers[..n])?;
        let target_layers: Vec<_> =
            layers[n..].iter().map(|(name, t)| (name.trim_start_matches("target.").to_string(), t.clone())).collect();
        weights::load_into(&mut critics.target, &target_layers)?;
        Ok(critics)
    }
}

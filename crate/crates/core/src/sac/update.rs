use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::models::policy::{noise, sample_in_graph};
use crate::models::{Actor, Critics, StateBatch};
use crate::nn::{AdamConfig, AdamState, Graph, Tensor};
use crate::sac::replay::Transition;
use crate::sac::SacError;
use crate::scalar::Scalar;

/// Discount, entropy weight and target smoothing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SacHyper {
    pub gamma: f64,
    pub alpha: f64,
    pub tau: f64,
}

impl Default for SacHyper {
    fn default() -> Self {
        Self { gamma: 0.99, alpha: 0.2, tau: 0.005 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub q1_loss: f64,
    pub q2_loss: f64,
    pub v_loss: f64,
    pub policy_loss: f64,
    /// Mean log-density of the reparameterized actions.
    pub log_prob: f64,
}

/// Actor, critics and their optimizers; the single owner of all parameters.
#[derive(Clone, Debug)]
pub struct SacAgent<T> {
    pub actor: Actor<T>,
    pub critics: Critics<T>,
    pub actor_opt: AdamState<T>,
    pub critic_opt: AdamState<T>,
    pub hyper: SacHyper,
    pub updates: u64,
}

impl<T: Scalar> SacAgent<T> {
    pub fn new(actor: Actor<T>, critics: Critics<T>, adam: AdamConfig, hyper: SacHyper) -> Self {
        let actor_opt = AdamState::new(&actor.params, adam);
        let critic_opt = AdamState::new(&critics.params, adam);
        Self { actor, critics, actor_opt, critic_opt, hyper, updates: 0 }
    }

    pub fn update(&mut self, batch: &[&Transition], rng: &mut impl Rng) -> Result<LossReport, SacError> {
        let eps = noise(batch.len(), rng);
        self.update_with_noise(batch, eps)
    }

    /// One gradient step on every network with the given reparameterization noise (`B × 2`).
    ///
    /// Both the policy loss and the value target are computed with the
    /// critics as they were before this step.
    pub fn update_with_noise(&mut self, batch: &[&Transition], eps: Tensor<T>) -> Result<LossReport, SacError> {
        if batch.is_empty() {
            return Err(SacError::Config("empty update batch".into()));
        }
        let n = batch.len();
        let states = StateBatch::<T>::from_observations(&batch.iter().map(|t| t.state.as_ref()).collect::<Vec<_>>())?;
        let next = StateBatch::<T>::from_observations(&batch.iter().map(|t| t.next_state.as_ref()).collect::<Vec<_>>())?;
        let (gamma, alpha) = (self.hyper.gamma, self.hyper.alpha);

        let v_next = self.critics.target_value(&next)?;
        let q_target: Vec<T> = batch
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let cont = if t.terminal { 0.0 } else { 1.0 };
                T::of(t.reward + gamma * cont * v_next.get(i, 0).as_f64())
            })
            .collect();

        // Policy loss through frozen critics.
        let mut g = Graph::new();
        let actor_bound = self.actor.params.bind(&mut g);
        let critic_bound = self.critics.params.bind_frozen(&mut g);
        let vars = self.actor.forward(&mut g, &actor_bound, &states, true)?;
        let sample = sample_in_graph(&mut g, vars.mean, vars.log_std, eps)?;
        let feat = self.critics.features(&mut g, &critic_bound, &states, true)?;
        let q1 = self.critics.q(&mut g, &critic_bound, feat, sample.action, 0)?;
        let q2 = self.critics.q(&mut g, &critic_bound, feat, sample.action, 1)?;
        let q_min = g.min(q1, q2)?;
        let weighted = g.scale(sample.log_prob, T::of(alpha));
        let per_sample = g.sub(weighted, q_min)?;
        let policy_loss = g.mean(per_sample);
        let v_target: Vec<T> = (0..n).map(|i| -g.value(per_sample).get(i, 0)).collect();
        let log_prob = g.value(sample.log_prob).sum().as_f64() / n as f64;
        let policy_value = g.value(policy_loss).item().as_f64();
        check_finite("policy loss", policy_value, self.updates)?;
        let grads = g.backward(policy_loss)?;
        self.actor.params.zero_grad();
        self.actor.params.accumulate(&actor_bound, &grads);

        // Critic losses.
        let mut g = Graph::new();
        let bound = self.critics.params.bind(&mut g);
        let feat = self.critics.features(&mut g, &bound, &states, true)?;
        let actions = Tensor::from_vec(n, 2, batch.iter().flat_map(|t| t.action.map(T::of)).collect())?;
        let a = g.input(actions);
        let v = self.critics.value(&mut g, &bound, feat)?;
        let q1 = self.critics.q(&mut g, &bound, feat, a, 0)?;
        let q2 = self.critics.q(&mut g, &bound, feat, a, 1)?;
        let yq = g.input(Tensor::from_vec(n, 1, q_target)?);
        let yv = g.input(Tensor::from_vec(n, 1, v_target)?);
        let l1 = g.mse(q1, yq)?;
        let l2 = g.mse(q2, yq)?;
        let lv = g.mse(v, yv)?;
        let partial = g.add(l1, l2)?;
        let total = g.add(partial, lv)?;
        let report = LossReport {
            q1_loss: g.value(l1).item().as_f64(),
            q2_loss: g.value(l2).item().as_f64(),
            v_loss: g.value(lv).item().as_f64(),
            policy_loss: policy_value,
            log_prob,
        };
        check_finite("q1 loss", report.q1_loss, self.updates)?;
        check_finite("q2 loss", report.q2_loss, self.updates)?;
        check_finite("value loss", report.v_loss, self.updates)?;
        let grads = g.backward(total)?;
        self.critics.params.zero_grad();
        self.critics.params.accumulate(&bound, &grads);

        self.critic_opt.update(&mut self.critics.params)?;
        self.actor_opt.update(&mut self.actor.params)?;
        self.critics.sync_target(T::of(self.hyper.tau));
        self.updates += 1;
        Ok(report)
    }
}

fn check_finite(what: &str, value: f64, update: u64) -> Result<(), SacError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(SacError::NonFinite(format!("{what} = {value} at update {update}")))
    }
}

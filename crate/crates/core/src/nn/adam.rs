use serde::{Deserialize, Serialize};

use crate::nn::params::ParamSet;
use crate::nn::tensor::Tensor;
use crate::nn::NnError;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 3e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Bias-corrected Adam moments for one [`ParamSet`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParamSet<T>, config: AdamConfig) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.value.rows(), p.value.cols())).collect();
        Self { config, step: 0, first: zeros(), second: zeros() }
    }

    /// Applies one step using the gradients stored in `params`.
    pub fn update(&mut self, params: &mut ParamSet<T>) -> Result<(), NnError> {
        if params.len() != self.first.len() {
            return Err(NnError::Shape("optimizer state does not match parameter set".into()));
        }
        self.step += 1;
        let c = self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let corr1 = T::of(1.0 - c.beta1.powi(self.step as i32));
        let corr2 = T::of(1.0 - c.beta2.powi(self.step as i32));
        let (lr, eps) = (T::of(c.lr), T::of(c.eps));
        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            if !p.grad.all_finite() {
                return Err(NnError::NonFinite(format!("gradient of {}", p.name)));
            }
            let vals = p.value.data_mut();
            let (md, vd) = (m.data_mut(), v.data_mut());
            for i in 0..vals.len() {
                let g = p.grad.data()[i];
                md[i] = b1 * md[i] + (T::one() - b1) * g;
                vd[i] = b2 * vd[i] + (T::one() - b2) * g * g;
                let mhat = md[i] / corr1;
                let vhat = vd[i] / corr2;
                vals[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

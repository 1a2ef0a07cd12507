use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::graph::{Gradients, Graph, Var};
use crate::nn::tensor::Tensor;
use crate::nn::NnError;
use crate::scalar::Scalar;

/// A named trainable tensor and its accumulated gradient.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamTensor<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Scalar> ParamTensor<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.rows(), value.cols());
        Self { name: name.into(), value, grad }
    }
}

/// Ordered collection of parameters owned by one model.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ParamSet<T> {
    params: Vec<ParamTensor<T>>,
}

/// Index of a parameter inside its [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamId(pub usize);

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        self.params.push(ParamTensor::new(name, value));
        ParamId(self.params.len() - 1)
    }

    /// Glorot-uniform weight matrix `fan_in × fan_out`.
    pub fn add_weight(&mut self, name: impl Into<String>, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> ParamId {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out).map(|_| T::of(rng.random_range(-limit..limit))).collect();
        self.add(name, Tensor::from_vec(fan_in, fan_out, data).expect("shape"))
    }

    pub fn add_bias(&mut self, name: impl Into<String>, len: usize, init: f64) -> ParamId {
        self.add(name, Tensor::filled(1, len, T::of(init)))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ParamTensor<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut ParamTensor<T>> {
        self.params.iter_mut()
    }

    pub fn get(&self, id: ParamId) -> &ParamTensor<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut ParamTensor<T> {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn by_name(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Total number of scalars.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Records every parameter as a differentiable leaf, in order.
    pub fn bind(&self, g: &mut Graph<T>) -> Bound {
        Bound(self.params.iter().map(|p| g.leaf(p.value.clone())).collect())
    }

    /// Records every parameter as a constant (no gradient).
    pub fn bind_frozen(&self, g: &mut Graph<T>) -> Bound {
        Bound(self.params.iter().map(|p| g.input(p.value.clone())).collect())
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(T::zero());
        }
    }

    /// Adds the gradients of the bound leaves into each parameter's `grad`.
    pub fn accumulate(&mut self, bound: &Bound, grads: &Gradients<T>) {
        for (p, &v) in self.params.iter_mut().zip(&bound.0) {
            if let Some(g) = grads.of(v) {
                p.grad.add_assign(g);
            }
        }
    }

    /// `self ← tau · source + (1 − tau) · self`.
    pub fn polyak_from(&mut self, source: &ParamSet<T>, tau: T) -> Result<(), NnError> {
        self.check_compatible(source)?;
        for (dst, src) in self.params.iter_mut().zip(&source.params) {
            for (d, &s) in dst.value.data_mut().iter_mut().zip(src.value.data()) {
                *d = tau * s + (T::one() - tau) * *d;
            }
        }
        Ok(())
    }

    pub fn copy_values_from(&mut self, source: &ParamSet<T>) -> Result<(), NnError> {
        self.check_compatible(source)?;
        for (dst, src) in self.params.iter_mut().zip(&source.params) {
            dst.value = src.value.clone();
        }
        Ok(())
    }

    pub fn check_compatible(&self, other: &ParamSet<T>) -> Result<(), NnError> {
        if self.params.len() != other.params.len()
            || self.params.iter().zip(&other.params).any(|(a, b)| a.value.shape() != b.value.shape())
        {
            return Err(NnError::Shape("parameter sets have different layouts".into()));
        }
        Ok(())
    }

    /// Squared L2 distance between the values of two identically shaped sets.
    pub fn distance_sq(&self, other: &ParamSet<T>) -> f64 {
        self.params
            .iter()
            .zip(&other.params)
            .flat_map(|(a, b)| a.value.data().iter().zip(b.value.data()))
            .map(|(x, y)| (x.as_f64() - y.as_f64()).powi(2))
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.all_finite())
    }
}

/// Graph handles for a bound [`ParamSet`], aligned by [`ParamId`].
#[derive(Clone, Debug)]
pub struct Bound(pub Vec<Var>);

impl Bound {
    pub fn get(&self, id: ParamId) -> Var {
        self.0[id.0]
    }
}

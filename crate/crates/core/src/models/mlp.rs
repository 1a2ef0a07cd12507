use rand::Rng;

use crate::nn::{Bound, Graph, NnError, ParamId, ParamSet, Var, LRELU_SLOPE};
use crate::scalar::Scalar;

/// Fully-connected stack with LReLU between layers and a linear output.
#[derive(Clone, Debug)]
pub struct Mlp {
    layers: Vec<(ParamId, ParamId)>,
    sizes: Vec<usize>,
}

impl Mlp {
    /// Registers the layers of `sizes[0] → … → sizes[last]` under `prefix`.
    pub fn build<T: Scalar>(
        params: &mut ParamSet<T>,
        prefix: &str,
        sizes: &[usize],
        output_bias: Option<&[f64]>,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let n = sizes.len() - 1;
        let mut layers = Vec::with_capacity(n);
        for (i, w) in sizes.windows(2).enumerate() {
            let wid = params.add_weight(format!("{prefix}.w{i}"), w[0], w[1], rng);
            let bid = match output_bias {
                Some(init) if i + 1 == n => {
                    assert_eq!(init.len(), w[1]);
                    let data = init.iter().map(|&v| T::of(v)).collect();
                    params.add(format!("{prefix}.b{i}"), crate::nn::Tensor::row_vector(data))
                }
                _ => params.add_bias(format!("{prefix}.b{i}"), w[1], 0.0),
            };
            layers.push((wid, bid));
        }
        Self { layers, sizes: sizes.to_vec() }
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn layers(&self) -> &[(ParamId, ParamId)] {
        &self.layers
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, bound: &Bound, x: Var) -> Result<Var, NnError> {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            h = g.dense(h, bound.get(w), bound.get(b))?;
            if i < last {
                h = g.lrelu(h, T::of(LRELU_SLOPE));
            }
        }
        Ok(h)
    }
}

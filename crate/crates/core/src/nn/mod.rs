//! Small dense-network substrate: tensors, a reverse-mode tape, parameter
//! sets, Adam, and the weight-file container.

pub mod adam;
pub mod graph;
pub mod params;
pub mod tensor;
pub mod weights;

pub use adam::{AdamConfig, AdamState};
pub use graph::{lrelu, sigmoid, softplus, Gradients, Graph, Segments, Var};
pub use params::{Bound, ParamId, ParamSet, ParamTensor};
pub use tensor::{matmul_t, Tensor};

/// Negative slope of every LReLU in the models.
pub const LRELU_SLOPE: f64 = 0.01;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("weight format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

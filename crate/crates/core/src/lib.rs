//! Support-point navigation.
//!
//! A mapless navigation stack built around a point-set policy: obstacle points
//! from an arbitrary 2D LiDAR are encoded individually, gated by the goal and
//! velocity state, and max-pooled into a handful of global features whose
//! source points ("support points") drive the decision. The crate contains
//! the simulator, sensor model, network substrate, models, SAC trainer and
//! evaluation harness.
//!
//! Geometry and sensing always run in `f64`; the networks and the trainer are
//! generic over [`Scalar`] (`f32` or `f64`).

pub mod eval;
pub mod models;
pub mod nn;
pub mod oracle;
pub mod sac;
pub mod scalar;
pub mod sensing;
pub mod world;

pub use scalar::Scalar;

pub type Actor64 = models::Actor<f64>;
pub type Actor32 = models::Actor<f32>;
pub type Critics64 = models::Critics<f64>;
pub type Critics32 = models::Critics<f32>;
pub type SacAgent64 = sac::SacAgent<f64>;
pub type SacAgent32 = sac::SacAgent<f32>;
pub type Trainer64 = sac::Trainer<f64>;
pub type Trainer32 = sac::Trainer<f32>;
pub type Tensor64 = nn::Tensor<f64>;
pub type Graph64 = nn::Graph<f64>;

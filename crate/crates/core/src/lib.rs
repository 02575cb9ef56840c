//! Transformer-based conditional GAN for multipath channel parameters.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which the rest of the crate uses.

pub mod channel;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod model;
pub mod training;
pub mod numerics;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor64 = numerics::Tensor<f64>;
pub type Tensor32 = numerics::Tensor<f32>;
pub type Graph64 = numerics::Graph<f64>;
pub type Graph32 = numerics::Graph<f32>;
pub type Optimizer64 = numerics::OptimizerState<f64>;
pub type Optimizer32 = numerics::OptimizerState<f32>;
pub type Model64 = model::Model<f64>;
pub type Model32 = model::Model<f32>;
pub type Checkpoint64 = model::checkpoint::Checkpoint<f64>;

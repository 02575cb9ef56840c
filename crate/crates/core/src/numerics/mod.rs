//! Tensor arithmetic, reverse-mode differentiation and optimizers.

pub mod graph;
pub mod optim;
pub mod tensor;

pub use graph::{input_gradient, Gradients, Graph, NodeId, Var};
pub use optim::{OptimizerKind, OptimizerState};
pub use tensor::Tensor;

//! Dense `f64` tensors, reverse-mode gradients, and the Adam optimizer.

mod graph;
mod optim;
mod params;
mod tensor;

pub use graph::{sigmoid, softmax_rows, Elementwise, Graph, SoftmaxNll, Var};
pub use optim::{Adam, AdamConfig};
pub use params::ParamStore;
pub use tensor::Tensor;

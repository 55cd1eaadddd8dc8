//! Minimal dense-tensor engine with tape-based reverse-mode
//! differentiation, a global-norm gradient clipper, and Adam/SGD updates.

mod graph;
mod optim;
mod tensor;

pub use graph::{AutodiffError, Gradients, Graph, NodeId, ParamId, ParamStore, Result};
pub use optim::Optimizer;
pub use tensor::{Scalar, Tensor};

//! Dense tensors and define-by-run reverse-mode differentiation.
//!
//! A [`Graph`] is rebuilt for every forward pass. Nodes are appended in
//! evaluation order, which is also a topological order, and
//! [`Graph::backward`] walks them in exact reverse append order.

mod check;
mod graph;
mod tensor;

pub use check::{grad_check, GradCheckReport, GradMismatch, REL_ERR_FLOOR};
pub use graph::{Gradients, Graph, NodeId, OpKind};
pub use tensor::Tensor;

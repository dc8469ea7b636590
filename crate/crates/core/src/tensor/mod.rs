//! Dense arrays and a small reverse-mode differentiation engine.
//!
//! A [`Graph`] evaluates each [`Primitive`] eagerly when it is applied and
//! records it; [`Graph::backward`] then sweeps the records in reverse
//! creation order. Only leaves created with [`Graph::input`] (and nodes
//! depending on them) receive gradients.

mod array;
mod backward;
pub mod check;
pub mod checkpoint;
mod graph;
mod params;

pub use array::{Array, IndexArray};
pub use backward::Gradients;
pub use check::grad_check;
pub use graph::{Attr, Attrs, Graph, NodeId, Primitive};
pub use params::{BoundParams, Initializer, ParamStore};

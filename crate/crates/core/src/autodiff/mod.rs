//! Dense arrays with reverse-mode automatic differentiation.

mod array;
mod graph;
pub mod gradcheck;
pub mod kernels;

pub use array::{numel, Array};
pub use gradcheck::{finite_difference_gradient, relative_error};
pub use graph::{Gradients, Graph, Var};

//! Reverse-mode automatic differentiation over [`Tensor`](crate::Tensor).

mod gradcheck;
mod tape;

pub use gradcheck::{check_gradients, finite_difference_check, relative_error};
pub use tape::{log_sigmoid, sigmoid, Gradients, OpKind, Tape, Var};

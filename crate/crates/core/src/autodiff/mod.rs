//! Reverse-mode automatic differentiation over [`Tensor`](crate::Tensor)s.
//!
//! A [`Graph`] records every operation applied to its [`Var`]s. Calling
//! [`Graph::backward`] on a scalar walks the records once in reverse and
//! returns the gradient of every differentiable leaf. Leaves made with
//! [`Graph::constant`] are never differentiated, which is how frozen
//! parameters and inputs skip gradient work entirely.

mod gradcheck;
mod graph;
mod nn;
mod ops;

pub use gradcheck::{
    grad_check, grad_check_with, relative_error, GradCheckOptions, GradCheckReport,
    GRAD_CHECK_STEP, RELATIVE_FLOOR,
};
pub use graph::{BackwardFn, Gradients, Graph, Var};
pub use nn::{IdMatrix, LstmOptions, PROBABILITY_FLOOR};
pub use ops::{concat_last, Activation};

//! Differentiation engine: second-order input jets for exact Laplacians and
//! a reverse-mode tape for parameter gradients of scalar losses.

mod jet;
mod tape;

pub use jet::{eval_with_jet, Field, FnField, Jet2, Real};
pub use tape::{grad, BatchBackward, Tape, TapeField, Var};

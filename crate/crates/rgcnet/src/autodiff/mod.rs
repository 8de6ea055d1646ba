//! Minimal reverse-mode differentiation over `Matrix` values.
//!
//! Enough to train the linear, attention, and batch-norm components while
//! reservoir weights stay frozen; trainable-reservoir variants record the
//! same computation through their weight leaves.

mod optim;
mod tape;

pub use optim::{Optimizer, OptimizerKind};
pub use tape::{Tape, Var};

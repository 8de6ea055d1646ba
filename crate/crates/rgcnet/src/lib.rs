//! Reservoir-based graph convolutional networks.
//!
//! A fixed-random-reservoir graph convolution with leaky integration, a
//! graph-classification pipeline, a transformer-style temporal graph
//! generator for connectome evolution, the matching evaluation metrics,
//! and a synthetic longitudinal-graph simulator — all on an in-house
//! dense-matrix and reverse-mode differentiation core.

pub mod autodiff;
pub mod checkpoint;
pub mod classify;
pub mod data;
pub mod error;
pub mod generate;
pub mod graph;
pub mod harness;
pub mod layers;
pub mod linalg;
pub mod metrics;
pub mod params;
pub mod reservoir;

pub use error::{Error, Result};
pub use graph::{Graph, Permutation};
pub use linalg::{Matrix, Rng};

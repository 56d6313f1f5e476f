//! Extreme multi-label classification driven by label correlation graphs.
//!
//! The pipeline infers a label-label correlation graph from the ground truth
//! with random walks, uses it to cluster labels into meta-labels, to build
//! graph-augmented label classifiers and to re-rank shortlists at training and
//! prediction time.

pub mod cluster;
pub mod data;
mod error;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod predict;
pub mod rank;
pub mod shortlist;
pub mod sparse;
pub mod synth;
pub mod train;
pub mod tensor;

pub use error::{Error, Result};
pub use sparse::{CsrMatrix, SparseVec};

/// Floating-point type used for parameters and activations.
#[cfg(not(feature = "f32"))]
pub type Real = f64;
#[cfg(feature = "f32")]
pub type Real = f32;

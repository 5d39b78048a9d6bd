//! Interpretable multi-view clustering.
//!
//! Per-view autoencoders embed each view, k-means on the concatenated
//! embeddings produces pseudo-labels, and an axis-aligned decision tree over
//! the original features explains cluster membership. The tree and the
//! embeddings are then refined alternately: the tree's leaf labels supervise
//! the autoencoders through a Student's-t soft assignment, and the refreshed
//! pseudo-labels drive a fixed-structure tree alternating optimization.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the synthetic
//! data generator and the command-line tool live in the `treemvc` crate.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

mod error;
mod linalg;

pub mod dtree;
pub mod kmeans;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod preprocess;
pub mod tao;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor2;

//! Graph convolutional networks with global self-attention.
//!
//! The crate implements plain GCN layers and globally self-attentive GCN
//! (GSA-GCN) layers with hand-written reverse-mode gradients, full-batch
//! and mini-batch training, dataset loaders and synthetic generators, and
//! numerical diagnostics for over-fitting and over-smoothing.

// `!(x > 0.0)` is how parameter checks reject NaN along with the range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod numkernel;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
pub use numkernel::Mat;

//! Communication-free GNN training core.
//!
//! Everything in this crate is pure computation over in-memory data: CSR graphs
//! and their normalizations, sparse-dense products, a small GCN / SGC /
//! mean-SAGE engine with hand-derived gradients, node / edge / layer-wise
//! samplers, a multilevel partitioner and the greedy interpolation soup that
//! merges independently trained ingredients. File formats, threads and the
//! command line live in the `soupgnn` crate.
#![no_std]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod graph;
pub mod matrix;
pub mod nn;
pub mod partition;
pub mod real;
pub mod rng;
pub mod sampling;
pub mod soup;
pub mod sparse;
pub mod synth;
pub mod train;

pub use dataset::{Dataset, SplitSet};
pub use error::{Error, Result};
pub use graph::{Graph, Subgraph};
pub use matrix::Matrix;
pub use real::Real;
pub use sparse::SparseMatrix;

/// Dense node feature matrix (rows are nodes).
pub type FeatureMatrix<T> = Matrix<T>;

/// Short hex fingerprint (first 8 bytes of SHA-256).
pub fn fingerprint(bytes: &[u8]) -> alloc::string::String {
    use core::fmt::Write;
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(bytes);
    let mut out = alloc::string::String::with_capacity(16);
    for b in &digest[..8] {
        let _ = write!(out, "{b:02x}");
    }
    out
}

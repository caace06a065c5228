//! Fixed-size graph embeddings from linear optimal transport.
//!
//! Each graph's nodes are embedded by parameter-free diffusion, and the
//! resulting point cloud is mapped to the displacement field of its optimal
//! transport map from a shared reference cloud. Euclidean distances between
//! these fields approximate 2-Wasserstein distances between graphs, while
//! only one transport problem is solved per graph.

pub mod diffusion;
pub mod error;
pub mod graph;
pub mod io;
pub mod lot;
pub mod ot;
pub mod pipeline;
pub mod reference;
pub mod ring;

pub use error::{Error, Result};

/// Per-node embedding vectors of one graph, `|V| x d`.
pub type NodeEmbedding = ndarray::Array2<f64>;

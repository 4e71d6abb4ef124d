//! Contrastive link prediction with edge balancing augmentation.
//!
//! A variational graph autoencoder is trained on the original graph and on a
//! periodically regenerated augmented view in which each node's least
//! confident edges are pruned and edges to its most similar nodes are added.
//! Neighbour-concentrated contrastive losses tie the two views together.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod eba;
pub mod error;
pub mod eval;
pub mod graph;
pub mod losses;
pub mod model;
pub mod optim;
pub mod report;
pub mod sparse;
pub mod trainer;

pub use error::{Error, Result};

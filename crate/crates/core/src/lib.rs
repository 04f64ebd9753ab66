//! Graph autoencoders (GAE, VGAE) with optional random-walk skip-gram regularization,
//! a walks-only DeepWalk baseline, and link prediction / clustering evaluation.
//!
//! The crate is organized bottom-up:
//!
//! - [`numkit`]: dense and CSR matrices, activations, Adam, seeded RNG streams
//! - [`graphio`]: dataset loading, adjacency normalization, edge splits
//! - [`gcn_autoencoder`]: two-layer GCN encoder, inner-product decoder, losses and gradients
//! - [`walks`]: random walks with restart and skip-gram context pairs
//! - [`skipgram`]: skip-gram objective over encoder embeddings and a context table
//! - [`trainer`]: the joint training loop
//! - [`evalkit`]: AUC/AP, k-means, clustering metrics
//! - [`cli`]: the `rwr-gae` command-line tool

pub mod cli;
pub mod error;
pub mod evalkit;
pub mod gcn_autoencoder;
pub mod graphio;
pub mod model;
pub mod numkit;
pub mod skipgram;
pub mod trainer;
pub mod walks;

pub use error::{Error, Result};

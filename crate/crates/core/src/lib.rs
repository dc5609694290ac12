//! Bayesian fusion estimation of piecewise-constant signals under a
//! Horseshoe shrinkage prior on successive differences, for linear chains and
//! for arbitrary undirected graphs reduced to depth-first-search trees.

pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod graph;
pub mod ingest;
pub mod model;
pub mod recovery;
pub mod sampler;
pub mod simulate;

pub use error::{FusionError, Result};

//! Hierarchical Dirichlet parameter learning and MCMC structure learning for
//! discrete Bayesian networks.

pub mod chain;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod exact;
pub mod graph;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod sim;
pub mod special;
pub mod structure;

pub use error::{Error, ErrorClass, Result};

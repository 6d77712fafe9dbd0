//! Unified heterogeneous-graph learning for constrained binary quadratic
//! problems on graphs.

pub mod cli;
pub mod dataset;
pub mod decoding;
pub mod encoding;
pub mod error;
pub mod graphs;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod problems;
pub mod repro;
pub mod sparse;
pub mod training;

pub use error::{Error, Result};

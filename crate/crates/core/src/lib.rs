//! Graph-derived node signals for tabular fraud classifiers, and a paired,
//! multi-seed evaluation protocol to measure what they add.

pub mod assembly;
pub mod embed;
pub mod error;
pub mod graph;
pub mod harness;
pub mod matrix;
pub mod models;
pub mod rng;
pub mod signals;
pub mod stats;

pub use error::{Error, Result};
pub use graph::{ComponentLabels, Graph, NodeIds, PerturbationSpec};
pub use matrix::{Matrix, RowSource};

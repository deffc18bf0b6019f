//! Distributed biased min-consensus (DBMC): graphs, gain schedules, protocol
//! right-hand sides, a fixed-step simulator with theorem checks, and
//! small-gain certification.

pub mod dynamics;
pub mod fixtures;
pub mod gain;
pub mod graph;
pub mod sim;
pub mod small_gain;

pub use graph::{Graph, GraphError, NodeId, StationaryProfile};

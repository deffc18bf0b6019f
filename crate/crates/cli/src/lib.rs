//! Experiment driver behind the `dbmc` binary: graph generation, runs with
//! convergence checks, small-gain certificates, plots and seed sweeps.

pub mod commands;
pub mod output;
pub mod plot;
pub mod spec;

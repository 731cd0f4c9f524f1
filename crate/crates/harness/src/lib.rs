//! Batch experiment harness for the rendezvous planners: dataset
//! collection, predictor training, seeded evaluations, ablation sweeps, and
//! distance-over-time figures.

pub mod commands;
pub mod config;
pub mod metrics;
pub mod plot;
pub mod run;

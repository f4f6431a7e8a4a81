//! Pipeline crate: file ingestion, synthetic data generation, feature
//! assembly, the experiment harness, and the command-line interface.

pub mod config;
pub mod features;
pub mod harness;
pub mod ingest;
pub mod synth;

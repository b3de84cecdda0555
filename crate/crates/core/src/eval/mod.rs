//! Evaluation toolkit: TREC-format I/O, effectiveness metrics, rank
//! statistics, synthetic workloads, and the cutoff sweep harness.

pub mod metrics;
pub mod stats;
pub mod sweep;
pub mod synth;
pub mod trec;

//! Benchmarks comparing hand-written SQL against capability-mediated and
//! contracted access: request workloads over a library database and
//! single-operation microbenchmarks with selectivity sweeps.

pub mod micro;
pub mod report;
pub mod stats;
pub mod variants;
pub mod workload;

pub use report::{to_csv, BenchResult};
pub use stats::Estimate;

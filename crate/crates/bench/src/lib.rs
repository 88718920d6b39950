//! Shared fixtures for the criterion benches.

use f0est_core::harness::{generate_stream, StreamSpec};

/// A shuffled stream of `f0` ids, each repeated twice.
pub fn shuffled_workload(f0: u64, seed: u64) -> Vec<u64> {
    generate_stream(&StreamSpec::repeated_shuffle(f0, 2, seed)).expect("valid workload spec")
}

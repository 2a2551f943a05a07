//! Inputs shared by the benchmarks.

use blink_core::predictor::FitInput;
use blink_core::workloadgen::{generate_spec, GenConfig};
use blink_core::WorkloadSpec;

/// Three noisy points on `4 + 2x`.
pub fn three_points() -> FitInput {
    FitInput::new(vec![(1.0, 6.1), (2.0, 7.9), (3.0, 10.2)]).expect("valid points")
}

/// A mid-sized random workload: 12 datasets, 4 of them cached.
pub fn random_workload(seed: u64) -> WorkloadSpec {
    generate_spec(&GenConfig {
        seed,
        n_datasets: 12,
        cached_count: 4,
        partitions_range: (64, 256),
        ..Default::default()
    })
    .expect("valid generator config")
}

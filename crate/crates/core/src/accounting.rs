//! Machine-second accounting of the whole recommendation process.

use serde::{Deserialize, Serialize};

use crate::logmodel::SampleRunLog;

/// Cost of one run: machines times wall time.
pub fn run_cost(machines: u32, wall_time: f64) -> f64 {
    machines as f64 * wall_time
}

/// Total machine-seconds spent on sample runs.
pub fn sample_runs_cost<'a>(logs: impl IntoIterator<Item = &'a SampleRunLog>) -> f64 {
    logs.into_iter()
        .map(|l| run_cost(l.machines, l.wall_time))
        .sum()
}

/// Sample runs plus the actual run they sized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostAccount {
    pub sample_runs_cost: f64,
    pub actual_run_cost: f64,
    pub total_cost: f64,
}

impl CostAccount {
    pub fn new(sample_runs_cost: f64, actual_run_cost: f64) -> Self {
        CostAccount {
            sample_runs_cost,
            actual_run_cost,
            total_cost: sample_runs_cost + actual_run_cost,
        }
    }

    /// Sample-run overhead relative to the actual run.
    pub fn sampling_overhead(&self) -> Option<f64> {
        (self.actual_run_cost > 0.0).then(|| self.sample_runs_cost / self.actual_run_cost)
    }
}

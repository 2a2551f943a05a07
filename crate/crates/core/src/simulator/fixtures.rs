//! Bundled workloads used by tests, benches and `blink gen --fixture`.

use super::{Action, CostParams, DatasetNode, InputGeometry, WorkloadSpec};
use crate::selector::MachineProfile;
use crate::size::{SizeFn, FULL_SCALE};

const MIB: u64 = 1 << 20;

fn node(id: &str, parents: &[&str], cached: bool, size: SizeFn, partitions: u32) -> DatasetNode {
    DatasetNode {
        id: id.into(),
        parents: parents.iter().map(|p| p.to_string()).collect(),
        cached,
        size,
        partitions,
    }
}

fn actions(sinks: &[&str]) -> Vec<Action> {
    sinks
        .iter()
        .map(|s| Action {
            sink: s.to_string(),
        })
        .collect()
}

/// Merged DAG of an eight-job logistic regression. Only the lineage counts
/// are meaningful (D1 and D2 are computed 8 and 6 times; with nothing cached
/// D0, D1, D2 and D11 are recomputed 7, 7, 5 and 3 times); the remaining
/// topology is illustrative.
pub fn logistic_regression() -> WorkloadSpec {
    let size = SizeFn::new(0.0, MIB as f64);
    let d = |id: &str, parents: &[&str]| node(id, parents, false, size, 16);
    WorkloadSpec {
        datasets: vec![
            d("D0", &[]),
            d("D1", &["D0"]),
            d("D2", &["D1"]),
            d("D3", &["D2"]),
            d("D4", &["D2"]),
            d("D11", &["D2"]),
            d("D12", &["D11"]),
            d("D13", &["D11"]),
            d("D14", &["D11"]),
            d("D15", &["D11"]),
            d("D24", &["D1"]),
        ],
        actions: actions(&["D1", "D3", "D4", "D12", "D13", "D14", "D15", "D24"]),
        iterations: 1,
        execution_memory: SizeFn::ZERO,
        cost_params: CostParams::default(),
        scale: FULL_SCALE,
        input: InputGeometry::default(),
    }
}

/// An SVM-like iterative job whose single cached training set fills exactly
/// seven machines at full scale: 420 partitions of 144 MiB against 8640 MiB
/// of cache per machine once 11200 MiB of execution memory is spread over 7.
pub fn svm_like() -> (WorkloadSpec, MachineProfile) {
    let per_scale = |mib: u64| (mib * MIB) as f64 / FULL_SCALE;
    let spec = WorkloadSpec {
        datasets: vec![
            node(
                "input",
                &[],
                false,
                SizeFn::new(0.0, per_scale(64_000)),
                420,
            ),
            node(
                "points",
                &["input"],
                true,
                SizeFn::new(0.0, per_scale(420 * 144)),
                420,
            ),
            node("gradient", &["points"], false, SizeFn::ZERO, 420),
        ],
        actions: actions(&["gradient"; 10]),
        iterations: 10,
        execution_memory: SizeFn::new(0.0, per_scale(11_200)),
        cost_params: CostParams {
            serial_time: 60.0,
            parallel_work: 100.0,
            overhead_coeff: 0.5,
            task_time_cached: 0.05,
            recompute_factor: super::DEFAULT_RECOMPUTE_FACTOR,
        },
        scale: FULL_SCALE,
        input: InputGeometry::default(),
    };
    (spec, MachineProfile::new(10_240 * MIB, 5_120 * MIB))
}

/// K-means with 100 equal cached partitions and room for 14 per machine.
pub fn kmeans() -> (WorkloadSpec, MachineProfile) {
    let spec = WorkloadSpec {
        datasets: vec![
            node(
                "input",
                &[],
                false,
                SizeFn::new(0.0, (6_400 * MIB) as f64 / FULL_SCALE),
                100,
            ),
            node(
                "points",
                &["input"],
                true,
                SizeFn::new(0.0, (6_400 * MIB) as f64 / FULL_SCALE),
                100,
            ),
            node("assign", &["points"], false, SizeFn::ZERO, 100),
        ],
        actions: actions(&["assign"; 10]),
        iterations: 1,
        execution_memory: SizeFn::ZERO,
        cost_params: CostParams {
            serial_time: 10.0,
            parallel_work: 20.0,
            overhead_coeff: 0.2,
            task_time_cached: 0.1,
            recompute_factor: super::DEFAULT_RECOMPUTE_FACTOR,
        },
        scale: FULL_SCALE,
        input: InputGeometry::default(),
    };
    let profile = MachineProfile::new(14 * 64 * MIB, 7 * 64 * MIB).with_task_capacity(14);
    (spec, profile)
}

/// Per-machine task counts of the skewed K-means run on 7 machines: machines
/// 3, 4 and 7 receive two tasks beyond capacity and machine 6 one.
pub const KMEANS_SKEWED_ASSIGNMENT: [u64; 7] = [12, 13, 16, 16, 12, 15, 16];

//! Ground-truth cluster simulator.
//!
//! A workload is a merged DAG of datasets and an ordered list of actions, each
//! of which evaluates the lineage of one sink dataset. Every execution of an
//! action touches each partition of every cached dataset in that lineage, in
//! topological order and partition-index order, on the machine the partition
//! was placed on. Machines cache partitions under a byte budget
//! `M - min(M - R, E / n)` with LRU eviction.
//!
//! Time model, per action execution: the slowest machine's task time (a
//! cached or first-time task costs `task_time_cached`, a recomputed one
//! `recompute_factor` times that), plus `overhead_coeff * n`, plus
//! `parallel_work / n`. The run adds `serial_time` once. Cost is
//! `machines * total_time`.

mod cache;
mod dag;
pub mod fixtures;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::selector::{cache_capacity, DemandModel, MachineProfile, SelectorError};
use crate::size::{Bytes, SizeFn};

pub use cache::{Access, MachineCache};
pub use dag::{computation_counts, recompute_counts, Dag};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("dependency cycle through dataset `{0}`")]
    CyclicDag(String),
    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),
    #[error("invalid workload: {0}")]
    InvalidSpec(String),
    #[error("workload has no datasets or no actions")]
    EmptyWorkload,
    #[error(transparent)]
    InvalidProfile(#[from] SelectorError),
    #[error("invalid placement: {0}")]
    InvalidPlacement(String),
}

pub type Result<T> = std::result::Result<T, SimError>;

pub const DEFAULT_RECOMPUTE_FACTOR: f64 = 97.0;

fn default_recompute_factor() -> f64 {
    DEFAULT_RECOMPUTE_FACTOR
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Seconds spent once per run regardless of cluster size.
    pub serial_time: f64,
    /// Machine-seconds of evenly divisible work per action.
    pub parallel_work: f64,
    /// Seconds per machine per action.
    pub overhead_coeff: f64,
    /// Seconds per task that reads a cached partition.
    pub task_time_cached: f64,
    #[serde(default = "default_recompute_factor")]
    pub recompute_factor: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            serial_time: 0.0,
            parallel_work: 0.0,
            overhead_coeff: 0.0,
            task_time_cached: 1.0,
            recompute_factor: DEFAULT_RECOMPUTE_FACTOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetNode {
    pub id: String,
    #[serde(default)]
    pub parents: Vec<String>,
    #[serde(default)]
    pub cached: bool,
    pub size: SizeFn,
    pub partitions: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub sink: String,
}

/// Input geometry used when emitting sample-run logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputGeometry {
    pub bytes_per_scale: f64,
    pub blocks_per_scale: f64,
}

impl Default for InputGeometry {
    fn default() -> Self {
        // 16K blocks of 64 MiB at full scale.
        InputGeometry {
            bytes_per_scale: 16.0 * 64.0 * (1u64 << 20) as f64,
            blocks_per_scale: 16.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub datasets: Vec<DatasetNode>,
    pub actions: Vec<Action>,
    /// Passes over the action list.
    pub iterations: u32,
    pub execution_memory: SizeFn,
    pub cost_params: CostParams,
    pub scale: f64,
    #[serde(default)]
    pub input: InputGeometry,
}

impl WorkloadSpec {
    /// Checks structural invariants and returns the index view of the DAG.
    pub fn validate(&self) -> Result<Dag> {
        if self.datasets.is_empty() || self.actions.is_empty() {
            return Err(SimError::EmptyWorkload);
        }
        if self.iterations == 0 {
            return Err(SimError::InvalidSpec(
                "iterations must be at least 1".into(),
            ));
        }
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return Err(SimError::InvalidSpec(format!(
                "invalid scale {}",
                self.scale
            )));
        }
        for d in &self.datasets {
            if d.partitions == 0 {
                return Err(SimError::InvalidSpec(format!(
                    "dataset `{}` has no partitions",
                    d.id
                )));
            }
            if !d.size.is_non_negative() {
                return Err(SimError::InvalidSpec(format!(
                    "dataset `{}` has a negative size term",
                    d.id
                )));
            }
        }
        if !self.execution_memory.is_non_negative() {
            return Err(SimError::InvalidSpec(
                "negative execution-memory term".into(),
            ));
        }
        let c = &self.cost_params;
        let costs = [
            c.serial_time,
            c.parallel_work,
            c.overhead_coeff,
            c.task_time_cached,
        ];
        if costs.iter().any(|v| !(*v >= 0.0)) || !(c.recompute_factor >= 1.0) {
            return Err(SimError::InvalidSpec("cost parameters out of range".into()));
        }
        Dag::build(self)
    }

    /// Exact size functions of the cached datasets and execution memory.
    pub fn demand_model(&self) -> DemandModel {
        DemandModel {
            cached: self
                .datasets
                .iter()
                .filter(|d| d.cached)
                .map(|d| d.size)
                .collect(),
            execution: self.execution_memory,
        }
    }

    pub fn at_scale(&self, scale: f64) -> WorkloadSpec {
        WorkloadSpec {
            scale,
            ..self.clone()
        }
    }

    pub fn cached_partitions(&self) -> u64 {
        self.datasets
            .iter()
            .filter(|d| d.cached)
            .map(|d| d.partitions as u64)
            .sum()
    }
}

/// How cached partitions are spread over machines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Placement {
    /// Round-robin over the global partition order.
    Balanced,
    /// Each partition on a uniformly random machine.
    Skewed { seed: u64 },
    /// Explicit per-machine partition counts, filled in global partition order.
    Assigned(Vec<u64>),
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Placement::Balanced => write!(f, "balanced"),
            Placement::Skewed { seed } => write!(f, "skewed:{seed}"),
            Placement::Assigned(counts) => {
                let parts: Vec<_> = counts.iter().map(u64::to_string).collect();
                write!(f, "assigned:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for Placement {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "balanced" if arg.is_empty() => Ok(Placement::Balanced),
            "skewed" => arg
                .parse()
                .map(|seed| Placement::Skewed { seed })
                .map_err(|_| format!("bad skew seed `{arg}`")),
            "assigned" => arg
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<u64>()
                        .map_err(|_| format!("bad count `{c}`"))
                })
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(Placement::Assigned),
            _ => Err(format!(
                "unknown placement `{s}` (expected balanced, skewed:SEED or assigned:N,N,...)"
            )),
        }
    }
}

impl Placement {
    fn machines_for(&self, partitions: usize, machines: u64) -> Result<Vec<usize>> {
        let n = machines as usize;
        match self {
            Placement::Balanced => Ok((0..partitions).map(|g| g % n).collect()),
            Placement::Skewed { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok((0..partitions).map(|_| rng.gen_range(0..n)).collect())
            }
            Placement::Assigned(counts) => {
                if counts.len() != n {
                    return Err(SimError::InvalidPlacement(format!(
                        "{} counts for {machines} machines",
                        counts.len()
                    )));
                }
                if counts.iter().sum::<u64>() != partitions as u64 {
                    return Err(SimError::InvalidPlacement(format!(
                        "counts cover {} partitions, workload has {partitions}",
                        counts.iter().sum::<u64>()
                    )));
                }
                Ok(counts
                    .iter()
                    .enumerate()
                    .flat_map(|(m, &c)| std::iter::repeat_n(m, c as usize))
                    .collect())
            }
        }
    }

    /// Cached partitions each machine receives.
    pub fn machine_counts(&self, partitions: u64, machines: u64) -> Result<Vec<u64>> {
        if machines == 0 {
            return Err(SimError::InvalidSpec(
                "machine count must be positive".into(),
            ));
        }
        let mut counts = vec![0u64; machines as usize];
        for m in self.machines_for(partitions as usize, machines)? {
            counts[m] += 1;
        }
        Ok(counts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub machines: u64,
    /// Cached partitions not resident at the end of the run.
    pub evicted_partitions: u64,
    /// Hit ratio over cached-partition accesses after first materialization.
    pub cached_fraction: f64,
    pub total_time: f64,
    pub total_cost: f64,
    /// Cached partitions placed on each machine.
    pub per_machine_tasks: BTreeMap<u64, u64>,
}

struct Partition {
    size: Bytes,
    machine: usize,
}

/// Simulates `spec` on `machines` identical machines.
pub fn run(
    spec: &WorkloadSpec,
    machines: u64,
    profile: &MachineProfile,
    placement: &Placement,
) -> Result<SimulationReport> {
    let dag = spec.validate()?;
    profile.validate()?;
    if machines == 0 {
        return Err(SimError::InvalidSpec(
            "machine count must be positive".into(),
        ));
    }
    let n = machines as usize;

    // Global partition index: cached datasets in topological order.
    let mut ranges: Vec<Option<(usize, usize)>> = vec![None; spec.datasets.len()];
    let mut sizes = Vec::new();
    for &d in &dag.topo {
        let node = &spec.datasets[d];
        if !node.cached {
            continue;
        }
        let total = node.size.bytes_at(spec.scale);
        let parts = node.partitions as u64;
        let start = sizes.len();
        sizes.extend((0..parts).map(|p| total / parts + u64::from(p < total % parts)));
        ranges[d] = Some((start, sizes.len()));
    }
    let homes = placement.machines_for(sizes.len(), machines)?;
    let partitions: Vec<Partition> = sizes
        .into_iter()
        .zip(homes)
        .map(|(size, machine)| Partition { size, machine })
        .collect();

    let exec_total = spec.execution_memory.bytes_at(spec.scale);
    let capacity = cache_capacity(exec_total, machines, profile);
    let mut load = vec![0u64; n];
    let mut per_machine_tasks: BTreeMap<u64, u64> = (0..machines).map(|m| (m, 0)).collect();
    for p in &partitions {
        load[p.machine] += p.size;
        *per_machine_tasks
            .get_mut(&(p.machine as u64))
            .expect("machine in range") += 1;
    }
    // Machines whose whole share fits never evict; skip LRU bookkeeping there.
    let mut caches: Vec<Option<MachineCache>> = load
        .iter()
        .map(|&l| (l as f64 > capacity).then(|| MachineCache::new(capacity, partitions.len())))
        .collect();
    let mut seen = vec![false; partitions.len()];

    // Cached partition ranges touched by each action, in topological order.
    let touched: Vec<Vec<(usize, usize)>> = dag
        .sinks
        .iter()
        .map(|&sink| {
            let lineage = dag.lineage(sink);
            dag.topo
                .iter()
                .filter(|&&d| lineage[d])
                .filter_map(|&d| ranges[d])
                .collect()
        })
        .collect();

    let c = &spec.cost_params;
    let recompute_time = c.recompute_factor * c.task_time_cached;
    let mut total_time = c.serial_time;
    let (mut reaccesses, mut hits) = (0u64, 0u64);
    let mut machine_time = vec![0.0f64; n];
    for _ in 0..spec.iterations {
        for ranges in &touched {
            machine_time.iter_mut().for_each(|t| *t = 0.0);
            for &(start, end) in ranges {
                for (g, p) in partitions.iter().enumerate().take(end).skip(start) {
                    let access = match caches[p.machine].as_mut() {
                        Some(cache) => cache.access(g, p.size),
                        None if std::mem::replace(&mut seen[g], true) => Access::Hit,
                        None => Access::Materialize,
                    };
                    machine_time[p.machine] += match access {
                        Access::Materialize => c.task_time_cached,
                        Access::Hit => {
                            reaccesses += 1;
                            hits += 1;
                            c.task_time_cached
                        }
                        Access::Miss => {
                            reaccesses += 1;
                            recompute_time
                        }
                    };
                }
            }
            let slowest = machine_time.iter().cloned().fold(0.0, f64::max);
            total_time +=
                slowest + c.overhead_coeff * machines as f64 + c.parallel_work / machines as f64;
        }
    }

    let evicted_partitions = caches
        .iter()
        .flatten()
        .map(|cache| (cache.materialized() - cache.resident()) as u64)
        .sum();
    let cached_fraction = if reaccesses == 0 {
        1.0
    } else {
        hits as f64 / reaccesses as f64
    };
    Ok(SimulationReport {
        machines,
        evicted_partitions,
        cached_fraction,
        total_time,
        total_cost: machines as f64 * total_time,
        per_machine_tasks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Area {
    /// More machines lower both time and cost.
    A,
    /// More machines lower time but raise cost.
    B,
    /// The cost minimum.
    C,
}

impl fmt::Display for Area {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Area::A => "A",
            Area::B => "B",
            Area::C => "C",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub report: SimulationReport,
    pub area: Area,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
}

impl Sweep {
    fn label(reports: Vec<SimulationReport>) -> Sweep {
        let best = reports
            .iter()
            .enumerate()
            .fold(None::<(usize, f64)>, |acc, (i, r)| match acc {
                Some((_, cost)) if cost <= r.total_cost => acc,
                _ => Some((i, r.total_cost)),
            })
            .map(|(i, _)| i);
        let rows = reports
            .into_iter()
            .enumerate()
            .map(|(i, report)| {
                let area = match best {
                    Some(b) if i < b => Area::A,
                    Some(b) if i == b => Area::C,
                    _ => Area::B,
                };
                SweepRow { report, area }
            })
            .collect();
        Sweep { rows }
    }

    /// Machine count of the cost minimum.
    pub fn optimum(&self) -> Option<u64> {
        self.rows
            .iter()
            .find(|r| r.area == Area::C)
            .map(|r| r.report.machines)
    }

    /// Smallest machine count that ran without evictions.
    pub fn first_eviction_free(&self) -> Option<u64> {
        self.rows
            .iter()
            .find(|r| r.report.evicted_partitions == 0)
            .map(|r| r.report.machines)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("machines,time_s,cost_machine_s,evicted,cached_fraction,area\n");
        for row in &self.rows {
            let r = &row.report;
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.machines,
                r.total_time,
                r.total_cost,
                r.evicted_partitions,
                r.cached_fraction,
                row.area
            ));
        }
        out
    }
}

/// Runs every machine count in `machines` (ascending) and labels the areas.
pub fn sweep(
    spec: &WorkloadSpec,
    machines: &[u64],
    profile: &MachineProfile,
    placement: &Placement,
) -> Result<Sweep> {
    sweep_parallel(spec, machines, profile, placement, 1)
}

/// [`sweep`] spread over `jobs` threads; the result does not depend on `jobs`.
pub fn sweep_parallel(
    spec: &WorkloadSpec,
    machines: &[u64],
    profile: &MachineProfile,
    placement: &Placement,
    jobs: usize,
) -> Result<Sweep> {
    if machines.is_empty() {
        return Err(SimError::InvalidSpec("empty machine range".into()));
    }
    if machines.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SimError::InvalidSpec(
            "machine range must be ascending".into(),
        ));
    }
    let jobs = jobs.clamp(1, machines.len());
    let reports = if jobs == 1 {
        machines
            .iter()
            .map(|&n| run(spec, n, profile, placement))
            .collect::<Result<Vec<_>>>()?
    } else {
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<SimulationReport>>>> =
            Mutex::new(machines.iter().map(|_| None).collect());
        std::thread::scope(|scope| {
            for _ in 0..jobs {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(&n) = machines.get(i) else { break };
                    let result = run(spec, n, profile, placement);
                    slots.lock().expect("sweep worker panicked")[i] = Some(result);
                });
            }
        });
        slots
            .into_inner()
            .expect("sweep worker panicked")
            .into_iter()
            .map(|r| r.expect("every slot filled"))
            .collect::<Result<Vec<_>>>()?
    };
    Ok(Sweep::label(reports))
}

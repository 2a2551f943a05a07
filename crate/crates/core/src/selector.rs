//! Cluster-size selection from predicted cached and execution memory.
//!
//! Each machine has a unified memory region `M` shared by cached data and
//! execution, of which at least `R` always stays available to the cache. With
//! a predicted execution-memory total `E` spread over `n` machines, each
//! machine can cache `M - min(M - R, E / n)` bytes. A cluster of `n` machines
//! is eviction-free when the predicted cached total fits the aggregate of that
//! capacity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::predictor::LinearModel;
use crate::size::{Bytes, SizeFn};

#[derive(Debug, Error, PartialEq)]
pub enum SelectorError {
    #[error("invalid machine profile: {0}")]
    InvalidProfile(String),
    #[error("no execution-memory model")]
    ModelMissing,
    #[error("invalid scale {0}")]
    InvalidScale(f64),
    #[error("every scale fits: the cached total does not grow with scale")]
    Unbounded,
    #[error("cached data does not fit on {0} machines at any scale")]
    InfeasibleAtAnyScale(u64),
    #[error("skew check needs a task capacity in the machine profile")]
    MissingTaskCapacity,
    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),
}

pub type Result<T> = std::result::Result<T, SelectorError>;

/// Per-machine memory geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineProfile {
    #[serde(rename = "unified_memory_bytes")]
    pub unified_memory: Bytes,
    #[serde(rename = "storage_floor_bytes")]
    pub storage_floor: Bytes,
    /// Cached partitions a machine holds at once; only the skew check uses it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_capacity: Option<u32>,
}

impl MachineProfile {
    pub fn new(unified_memory: Bytes, storage_floor: Bytes) -> Self {
        MachineProfile {
            unified_memory,
            storage_floor,
            task_capacity: None,
        }
    }

    pub fn with_task_capacity(mut self, capacity: u32) -> Self {
        self.task_capacity = Some(capacity);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.storage_floor == 0 {
            return Err(SelectorError::InvalidProfile(
                "storage floor must be positive".into(),
            ));
        }
        if self.storage_floor > self.unified_memory {
            return Err(SelectorError::InvalidProfile(format!(
                "storage floor {} exceeds unified memory {}",
                self.storage_floor, self.unified_memory
            )));
        }
        if self.task_capacity == Some(0) {
            return Err(SelectorError::InvalidProfile(
                "task capacity must be positive".into(),
            ));
        }
        Ok(())
    }

    fn headroom(&self) -> f64 {
        (self.unified_memory - self.storage_floor) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Rationale {
    NoCachedData,
    Fits,
    CappedAtMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub machines: u64,
    pub predicted_total_cached: Bytes,
    pub predicted_execution_memory: Bytes,
    pub machines_min: u64,
    pub machines_max: u64,
    pub rationale: Rationale,
}

/// `(ceil(total / M), ceil(total / R))`, each at least 1.
pub fn machines_bounds(total_cached: Bytes, profile: &MachineProfile) -> Result<(u64, u64)> {
    profile.validate()?;
    let min = total_cached.div_ceil(profile.unified_memory).max(1);
    let max = total_cached.div_ceil(profile.storage_floor).max(1);
    Ok((min, max))
}

/// Execution memory claimed on each machine: `min(M - R, exec_total / n)`.
pub fn machine_execution_memory(exec_total: Bytes, machines: u64, profile: &MachineProfile) -> f64 {
    assert!(machines >= 1, "machine count must be positive");
    profile.headroom().min(exec_total as f64 / machines as f64)
}

/// Bytes each machine can cache while `exec_total` is spread over `machines`.
pub fn cache_capacity(exec_total: Bytes, machines: u64, profile: &MachineProfile) -> f64 {
    profile.unified_memory as f64 - machine_execution_memory(exec_total, machines, profile)
}

/// Whether `total_cached` fits the aggregate cache of `machines` machines.
pub fn fits(
    total_cached: Bytes,
    exec_total: Bytes,
    machines: u64,
    profile: &MachineProfile,
) -> bool {
    total_cached as f64 <= cache_capacity(exec_total, machines, profile) * machines as f64
}

/// Predicted memory demand of an application at a given scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Demand {
    pub total_cached: Bytes,
    pub execution: Bytes,
}

/// Size functions of every cached dataset plus execution memory.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandModel {
    pub cached: Vec<SizeFn>,
    pub execution: SizeFn,
}

impl DemandModel {
    pub fn from_models(
        size_models: &BTreeMap<String, LinearModel>,
        exec_model: Option<&LinearModel>,
    ) -> Result<Self> {
        let execution = exec_model.ok_or(SelectorError::ModelMissing)?.size_fn();
        Ok(DemandModel {
            cached: size_models.values().map(LinearModel::size_fn).collect(),
            execution,
        })
    }

    /// Each dataset is rounded to bytes before summing.
    pub fn at(&self, scale: f64) -> Demand {
        Demand {
            total_cached: self.cached.iter().map(|f| f.bytes_at(scale)).sum(),
            execution: self.execution.bytes_at(scale),
        }
    }

    fn cached_slope(&self) -> f64 {
        self.cached.iter().map(|f| f.slope).sum()
    }
}

/// Smallest machine count whose aggregate cache holds the demand.
pub fn recommend(demand: Demand, profile: &MachineProfile) -> Result<Recommendation> {
    profile.validate()?;
    if demand.total_cached == 0 {
        return Ok(Recommendation {
            machines: 1,
            predicted_total_cached: 0,
            predicted_execution_memory: demand.execution,
            machines_min: 1,
            machines_max: 1,
            rationale: Rationale::NoCachedData,
        });
    }
    let (min, max) = machines_bounds(demand.total_cached, profile)?;
    let found = (min..=max).find(|&n| fits(demand.total_cached, demand.execution, n, profile));
    let (machines, rationale) = match found {
        Some(n) => (n, Rationale::Fits),
        None => (max, Rationale::CappedAtMax),
    };
    Ok(Recommendation {
        machines,
        predicted_total_cached: demand.total_cached,
        predicted_execution_memory: demand.execution,
        machines_min: min,
        machines_max: max,
        rationale,
    })
}

/// Predicts demand at `scale` from fitted models and recommends a cluster size.
pub fn select_cluster_size(
    size_models: &BTreeMap<String, LinearModel>,
    exec_model: Option<&LinearModel>,
    scale: f64,
    profile: &MachineProfile,
) -> Result<Recommendation> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(SelectorError::InvalidScale(scale));
    }
    let model = DemandModel::from_models(size_models, exec_model)?;
    recommend(model.at(scale), profile)
}

/// Default bounds granularity: 1% of full scale.
pub const DEFAULT_GRANULARITY: f64 = 10.0;

// Scales beyond this many granularity steps are treated as unbounded.
const MAX_STEPS: u64 = 1 << 52;

/// Largest multiple of `granularity` at which the demand fits on `machines`.
pub fn cluster_bounds(
    demand: &DemandModel,
    machines: u64,
    profile: &MachineProfile,
    granularity: f64,
) -> Result<f64> {
    profile.validate()?;
    if machines == 0 {
        return Err(SelectorError::InvalidProfile(
            "machine count must be positive".into(),
        ));
    }
    if !(granularity > 0.0 && granularity.is_finite()) {
        return Err(SelectorError::InvalidScale(granularity));
    }
    let holds = |step: u64| {
        let d = demand.at(step as f64 * granularity);
        fits(d.total_cached, d.execution, machines, profile)
    };
    if !holds(0) {
        return Err(SelectorError::InfeasibleAtAnyScale(machines));
    }
    if demand.cached_slope() == 0.0 {
        // Capacity only shrinks toward R * n as execution memory grows.
        let limit_exec = if demand.execution.slope > 0.0 {
            u64::MAX
        } else {
            demand.execution.bytes_at(0.0)
        };
        if fits(demand.at(0.0).total_cached, limit_exec, machines, profile) {
            return Err(SelectorError::Unbounded);
        }
    }
    // Exponential search for a failing step, then bisection.
    let (mut lo, mut hi) = (0u64, 1u64);
    while holds(hi) {
        lo = hi;
        hi = hi
            .checked_mul(2)
            .filter(|&h| h <= MAX_STEPS)
            .ok_or(SelectorError::Unbounded)?;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo == 0 {
        return Err(SelectorError::InfeasibleAtAnyScale(machines));
    }
    Ok(lo as f64 * granularity)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkewCheck {
    pub ok: bool,
    pub predicted_evictions: u64,
    pub assignment: Vec<u64>,
}

/// Near-equal split of `partitions` over `machines`, larger shares first.
pub fn balanced_assignment(partitions: u64, machines: u64) -> Vec<u64> {
    let base = partitions / machines;
    let extra = partitions % machines;
    (0..machines).map(|m| base + u64::from(m < extra)).collect()
}

/// Partitions that cannot stay cached when each machine holds at most
/// `task_capacity` of them. Without an explicit assignment the partitions are
/// spread evenly over the recommended machines.
pub fn skew_adjusted_check(
    recommendation: &Recommendation,
    partitions: u64,
    profile: &MachineProfile,
    assignment: Option<&[u64]>,
) -> Result<SkewCheck> {
    let capacity = profile
        .task_capacity
        .ok_or(SelectorError::MissingTaskCapacity)? as u64;
    let assignment = match assignment {
        Some(a) => {
            if a.len() as u64 != recommendation.machines {
                return Err(SelectorError::InvalidAssignment(format!(
                    "{} machines in assignment, {} recommended",
                    a.len(),
                    recommendation.machines
                )));
            }
            if a.iter().sum::<u64>() != partitions {
                return Err(SelectorError::InvalidAssignment(format!(
                    "assignment covers {} partitions, expected {partitions}",
                    a.iter().sum::<u64>()
                )));
            }
            a.to_vec()
        }
        None => balanced_assignment(partitions, recommendation.machines),
    };
    let predicted_evictions = assignment.iter().map(|&a| a.saturating_sub(capacity)).sum();
    Ok(SkewCheck {
        ok: predicted_evictions == 0,
        predicted_evictions,
        assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GIB: u64 = 1 << 30;

    fn profile() -> MachineProfile {
        MachineProfile::new(10 * GIB, 5 * GIB)
    }

    fn demand(total: u64, exec: u64) -> Demand {
        Demand {
            total_cached: total,
            execution: exec,
        }
    }

    #[test]
    fn bounds() {
        assert_eq!(machines_bounds(40 * GIB, &profile()).unwrap(), (4, 8));
        assert_eq!(machines_bounds(0, &profile()).unwrap(), (1, 1));
        assert_eq!(machines_bounds(41 * GIB, &profile()).unwrap(), (5, 9));
        assert!(matches!(
            machines_bounds(1, &MachineProfile::new(10, 0)),
            Err(SelectorError::InvalidProfile(_))
        ));
        assert!(matches!(
            machines_bounds(1, &MachineProfile::new(10, 11)),
            Err(SelectorError::InvalidProfile(_))
        ));
    }

    #[test]
    fn execution_memory_clamp() {
        let p = profile();
        assert_eq!(machine_execution_memory(12 * GIB, 4, &p), 3.0 * GIB as f64);
        assert_eq!(machine_execution_memory(12 * GIB, 2, &p), 5.0 * GIB as f64);
        assert_eq!(machine_execution_memory(0, 3, &p), 0.0);
    }

    #[test]
    fn forty_gib_needs_six_machines() {
        let r = recommend(demand(40 * GIB, 12 * GIB), &profile()).unwrap();
        assert_eq!(r.machines, 6);
        assert_eq!((r.machines_min, r.machines_max), (4, 8));
        assert_eq!(r.rationale, Rationale::Fits);
        assert!(!fits(40 * GIB, 12 * GIB, 5, &profile()));
    }

    #[test]
    fn small_and_empty_demands() {
        assert_eq!(
            recommend(demand(4 * GIB, GIB), &profile())
                .unwrap()
                .machines,
            1
        );
        let r = recommend(demand(0, 7 * GIB), &profile()).unwrap();
        assert_eq!((r.machines, r.rationale), (1, Rationale::NoCachedData));
    }

    #[test]
    fn exact_fit_counts_as_fitting() {
        // 8 GiB of cache per machine on 5 machines.
        assert!(fits(40 * GIB, 10 * GIB, 5, &profile()));
    }

    #[test]
    fn missing_exec_model() {
        let models = BTreeMap::new();
        assert_eq!(
            select_cluster_size(&models, None, 1000.0, &profile()),
            Err(SelectorError::ModelMissing)
        );
    }

    fn gib_model(total_slope: f64, exec_slope: f64) -> DemandModel {
        DemandModel {
            cached: vec![SizeFn::new(0.0, total_slope * GIB as f64)],
            execution: SizeFn::new(0.0, exec_slope * GIB as f64),
        }
    }

    #[test]
    fn bounds_on_two_machines() {
        let model = gib_model(0.01, 0.004);
        assert_eq!(cluster_bounds(&model, 2, &profile(), 1.0).unwrap(), 1428.0);
        assert_eq!(cluster_bounds(&model, 2, &profile(), 10.0).unwrap(), 1420.0);
        // Per-machine execution memory at the bound stays under M - R.
        let exec = model.at(1428.0).execution;
        assert!(machine_execution_memory(exec, 2, &profile()) < (5 * GIB) as f64);
    }

    #[test]
    fn bounds_errors() {
        let flat = DemandModel {
            cached: vec![SizeFn::new(GIB as f64, 0.0)],
            execution: SizeFn::ZERO,
        };
        assert_eq!(
            cluster_bounds(&flat, 1, &profile(), 1.0),
            Err(SelectorError::Unbounded)
        );
        let huge = DemandModel {
            cached: vec![SizeFn::new(21.0 * GIB as f64, 0.0)],
            execution: SizeFn::ZERO,
        };
        assert_eq!(
            cluster_bounds(&huge, 2, &profile(), 1.0),
            Err(SelectorError::InfeasibleAtAnyScale(2))
        );
        // Flat cache that only fits while execution memory is small.
        let squeezed = DemandModel {
            cached: vec![SizeFn::new(8.0 * GIB as f64, 0.0)],
            execution: SizeFn::new(0.0, 0.01 * GIB as f64),
        };
        assert_eq!(
            cluster_bounds(&squeezed, 1, &profile(), 1.0).unwrap(),
            200.0
        );
    }

    #[test]
    fn kmeans_skew() {
        let p = profile().with_task_capacity(14);
        let rec = recommend(demand(1, 0), &p).unwrap();
        let rec = Recommendation { machines: 7, ..rec };
        let skewed = [16, 16, 16, 15, 13, 12, 12];
        let check = skew_adjusted_check(&rec, 100, &p, Some(&skewed)).unwrap();
        assert_eq!((check.ok, check.predicted_evictions), (false, 7));
        let rec8 = Recommendation { machines: 8, ..rec };
        let check = skew_adjusted_check(&rec8, 100, &p, None).unwrap();
        assert_eq!((check.ok, check.predicted_evictions), (true, 0));
        assert_eq!(*check.assignment.iter().max().unwrap(), 13);
        assert_eq!(
            skew_adjusted_check(&rec, 100, &profile(), None),
            Err(SelectorError::MissingTaskCapacity)
        );
        assert!(skew_adjusted_check(&rec, 99, &p, Some(&skewed)).is_err());
    }
}

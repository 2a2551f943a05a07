//! Cluster sizing for iterative data-flow applications from tiny sample runs.
//!
//! The pipeline is: plan a handful of single-machine sample runs
//! ([`sampler`]), parse their logs ([`logmodel`]), fit non-negative linear
//! models of cached-dataset size and execution memory against data scale
//! ([`predictor`]), and pick the smallest cluster whose aggregate cache
//! capacity holds every cached dataset at full scale ([`selector`]).
//!
//! [`simulator`] replays a merged DAG against a cluster with per-partition
//! LRU caching and serves as ground truth; [`workloadgen`] produces synthetic
//! workloads with known size functions to drive both.

#![forbid(unsafe_code)]
// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![warn(rust_2018_idioms, missing_debug_implementations)]

pub mod accounting;
pub mod logmodel;
pub mod predictor;
pub mod sampler;
pub mod selector;
pub mod simulator;
pub mod size;
pub mod workloadgen;

pub use accounting::CostAccount;
pub use logmodel::{CachedDatasetRecord, RunFeatures, SampleRunLog};
pub use predictor::{FitInput, LinearModel, ModelFile};
pub use sampler::{MonitorDecision, SampleMethod, SamplePlan};
pub use selector::{MachineProfile, Rationale, Recommendation};
pub use simulator::{CostParams, Placement, SimulationReport, WorkloadSpec};
pub use size::{Bytes, SizeFn, FULL_SCALE};
pub use workloadgen::GenConfig;

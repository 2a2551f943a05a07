//! Synthetic workloads with known size functions, and the sample-run logs
//! they would produce.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::logmodel::{CachedDatasetRecord, SampleRunLog};
use crate::selector::MachineProfile;
use crate::simulator::{Action, CostParams, DatasetNode, InputGeometry, WorkloadSpec};
use crate::size::{round_bytes, Bytes, SizeFn, FULL_SCALE};

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}

const MIB: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub seed: u64,
    pub n_datasets: usize,
    pub cached_count: usize,
    /// Inclusive range of size intercepts, bytes.
    pub intercept_range: (Bytes, Bytes),
    /// Inclusive range of size slopes, bytes per scale unit.
    pub slope_range: (Bytes, Bytes),
    pub exec_intercept_range: (Bytes, Bytes),
    pub exec_slope_range: (Bytes, Bytes),
    pub partitions_range: (u32, u32),
    /// Partition counts are rounded up to a multiple of this.
    pub partition_multiple: u32,
    /// Size intercepts and slopes are rounded up to a multiple of this, so
    /// that cached datasets split into equal partitions.
    pub size_multiple: Bytes,
    /// Additional actions on random sinks beyond one per leaf dataset.
    pub extra_actions: usize,
    pub iterations: u32,
    pub noise_relative: f64,
    /// Sample-run scales, model units.
    pub scales: Vec<f64>,
    pub cost_params: CostParams,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            n_datasets: 6,
            cached_count: 2,
            intercept_range: (0, 64 * MIB),
            slope_range: (MIB, 64 * MIB),
            exec_intercept_range: (0, 16 * MIB),
            exec_slope_range: (0, 16 * MIB),
            partitions_range: (8, 64),
            partition_multiple: 1,
            size_multiple: 1,
            extra_actions: 2,
            iterations: 3,
            noise_relative: 0.0,
            scales: vec![1.0, 2.0, 3.0],
            cost_params: CostParams {
                serial_time: 30.0,
                parallel_work: 60.0,
                overhead_coeff: 0.5,
                task_time_cached: 0.1,
                recompute_factor: crate::simulator::DEFAULT_RECOMPUTE_FACTOR,
            },
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidConfig(m.to_string()));
        if self.n_datasets == 0 {
            return bad("need at least one dataset");
        }
        if self.cached_count > self.n_datasets {
            return bad("cached_count exceeds n_datasets");
        }
        if !(0.0..=0.5).contains(&self.noise_relative) {
            return bad("noise_relative must lie in [0, 0.5]");
        }
        let ranges = [
            self.intercept_range,
            self.slope_range,
            self.exec_intercept_range,
            self.exec_slope_range,
        ];
        if ranges.iter().any(|(lo, hi)| lo > hi) {
            return bad("empty size range");
        }
        let (plo, phi) = self.partitions_range;
        if plo == 0 || plo > phi {
            return bad("partitions range must be non-empty and positive");
        }
        if self.partition_multiple == 0 || self.size_multiple == 0 {
            return bad("partition_multiple and size_multiple must be positive");
        }
        if self.iterations == 0 {
            return bad("iterations must be positive");
        }
        if self.scales.iter().any(|s| !(*s > 0.0)) {
            return bad("scales must be positive");
        }
        Ok(())
    }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (Bytes, Bytes)) -> f64 {
    rng.gen_range(lo..=hi) as f64
}

fn draw_multiple(rng: &mut ChaCha8Rng, range: (Bytes, Bytes), multiple: Bytes) -> f64 {
    (draw(rng, range) as Bytes).next_multiple_of(multiple) as f64
}

/// Builds a random acyclic workload. Every dataset lies in the lineage of at
/// least one action, and the result is a pure function of the config.
pub fn generate_spec(config: &GenConfig) -> Result<WorkloadSpec, GenError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_datasets;
    let mut cached = vec![false; n];
    for i in rand::seq::index::sample(&mut rng, n, config.cached_count) {
        cached[i] = true;
    }
    let mut datasets = Vec::with_capacity(n);
    let mut has_child = vec![false; n];
    for (i, &is_cached) in cached.iter().enumerate() {
        let mut parents = Vec::new();
        if i > 0 {
            let first = rng.gen_range(0..i);
            parents.push(first);
            if i > 1 && rng.gen_bool(0.3) {
                let second = rng.gen_range(0..i);
                if second != first {
                    parents.push(second);
                }
            }
        }
        for &p in &parents {
            has_child[p] = true;
        }
        let (plo, phi) = config.partitions_range;
        let partitions = rng
            .gen_range(plo..=phi)
            .next_multiple_of(config.partition_multiple);
        let size = SizeFn::new(
            draw_multiple(&mut rng, config.intercept_range, config.size_multiple),
            draw_multiple(&mut rng, config.slope_range, config.size_multiple),
        );
        datasets.push(DatasetNode {
            id: format!("d{i}"),
            parents: parents.iter().map(|p| format!("d{p}")).collect(),
            cached: is_cached,
            size,
            partitions,
        });
    }
    let mut sinks: Vec<usize> = (0..n).filter(|&i| !has_child[i]).collect();
    for _ in 0..config.extra_actions {
        sinks.push(rng.gen_range(0..n));
    }
    sinks.shuffle(&mut rng);
    let execution_memory = SizeFn::new(
        draw(&mut rng, config.exec_intercept_range),
        draw(&mut rng, config.exec_slope_range),
    );
    let spec = WorkloadSpec {
        datasets,
        actions: sinks
            .into_iter()
            .map(|s| Action {
                sink: format!("d{s}"),
            })
            .collect(),
        iterations: config.iterations,
        execution_memory,
        cost_params: config.cost_params,
        scale: FULL_SCALE,
        input: InputGeometry::default(),
    };
    spec.validate()
        .map_err(|e| GenError::InvalidConfig(format!("generated spec invalid: {e}")))?;
    Ok(spec)
}

/// The log a single-machine sample run of `spec` at `scale` would record.
/// Cached sizes are perturbed by a uniform multiplicative factor in
/// `[1 - noise_relative, 1 + noise_relative]`, one draw per dataset.
pub fn emit_sample_log(
    spec: &WorkloadSpec,
    scale: f64,
    noise_relative: f64,
    noise_seed: u64,
) -> SampleRunLog {
    assert!(scale > 0.0, "sample scale must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let block_count = ((scale * spec.input.blocks_per_scale).round() as u32).max(1);
    let cached_datasets = spec
        .datasets
        .iter()
        .filter(|d| d.cached)
        .map(|d| {
            let total_size = if noise_relative > 0.0 {
                let eps = rng.gen_range(-noise_relative..=noise_relative);
                round_bytes(d.size.eval(scale) * (1.0 + eps))
            } else {
                d.size.bytes_at(scale)
            };
            CachedDatasetRecord {
                dataset_id: d.id.clone(),
                total_size,
                partition_count: block_count,
                evicted_partitions: 0,
            }
        })
        .collect();
    let executions = spec.actions.len() as u64 * spec.iterations as u64;
    let c = &spec.cost_params;
    let per_action = block_count as f64 * c.task_time_cached + c.overhead_coeff + c.parallel_work;
    SampleRunLog {
        app_id: "synthetic".into(),
        data_scale: scale,
        input_bytes: round_bytes(spec.input.bytes_per_scale * scale),
        block_count,
        machines: 1,
        cached_datasets,
        peak_execution_memory: spec.execution_memory.bytes_at(scale),
        eviction_occurred: false,
        task_placements: [(0, block_count as u64 * executions)].into_iter().collect(),
        wall_time: c.serial_time + executions as f64 * per_action,
    }
}

/// Draws a machine profile for which `ceil(total_cached / R)`, and hence any
/// recommendation, is at most `max_machines`. `M` lies between `R` and `2R`.
pub fn draw_profile(total_cached: Bytes, max_machines: u64, seed: u64) -> MachineProfile {
    assert!(max_machines >= 1, "max_machines must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = rng.gen_range(1..=max_machines);
    let floor = total_cached.div_ceil(target).max(1);
    let unified = floor + (floor as f64 * rng.gen_range(0.0..1.0)).round() as Bytes;
    MachineProfile::new(unified, floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logmodel::{extract_features, parse_log_str};
    use crate::sampler::{monitor_sample_run, MonitorDecision};

    #[test]
    fn deterministic_per_seed() {
        let config = GenConfig::default();
        assert_eq!(
            generate_spec(&config).unwrap(),
            generate_spec(&config).unwrap()
        );
        let other = GenConfig {
            seed: 1,
            ..config.clone()
        };
        assert_ne!(
            generate_spec(&config).unwrap(),
            generate_spec(&other).unwrap()
        );
    }

    #[test]
    fn every_dataset_reachable_from_an_action() {
        for seed in 0..50 {
            let spec = generate_spec(&GenConfig {
                seed,
                n_datasets: 12,
                ..Default::default()
            })
            .unwrap();
            let counts = crate::simulator::computation_counts(&spec).unwrap();
            assert!(counts.values().all(|&c| c >= 1), "seed {seed}");
            assert_eq!(spec.datasets.iter().filter(|d| d.cached).count(), 2);
        }
    }

    #[test]
    fn no_cached_datasets_means_single_machine() {
        let spec = generate_spec(&GenConfig {
            cached_count: 0,
            ..Default::default()
        })
        .unwrap();
        let log = emit_sample_log(&spec, 1.0, 0.0, 0);
        assert_eq!(
            monitor_sample_run(&log, &[1.0, 2.0, 3.0]),
            MonitorDecision::RecommendSingleMachine
        );
    }

    #[test]
    fn noiseless_sizes_follow_size_function() {
        let mut spec = generate_spec(&GenConfig {
            n_datasets: 1,
            cached_count: 1,
            ..Default::default()
        })
        .unwrap();
        spec.datasets[0].size = SizeFn::new((4 * MIB) as f64, (8 * MIB) as f64);
        let log = emit_sample_log(&spec, 2.0, 0.0, 9);
        let parsed = parse_log_str(&log.to_event_lines()).unwrap();
        assert_eq!(parsed, log);
        assert_eq!(extract_features(&parsed).per_dataset_size["d0"], 20 * MIB);
        assert_eq!(emit_sample_log(&spec, 2.0, 0.0, 10), log);
    }

    #[test]
    fn noise_is_seeded_and_bounded() {
        let spec = generate_spec(&GenConfig {
            cached_count: 4,
            ..Default::default()
        })
        .unwrap();
        let a = emit_sample_log(&spec, 3.0, 0.05, 7);
        assert_eq!(a, emit_sample_log(&spec, 3.0, 0.05, 7));
        for rec in &a.cached_datasets {
            let truth = spec
                .datasets
                .iter()
                .find(|d| d.id == rec.dataset_id)
                .unwrap()
                .size
                .eval(3.0);
            assert!((rec.total_size as f64 - truth).abs() <= 0.05 * truth + 1.0);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            GenConfig {
                cached_count: 7,
                ..Default::default()
            },
            GenConfig {
                noise_relative: 0.6,
                ..Default::default()
            },
            GenConfig {
                partitions_range: (0, 3),
                ..Default::default()
            },
            GenConfig {
                partition_multiple: 0,
                ..Default::default()
            },
        ];
        for config in bad {
            assert!(matches!(
                generate_spec(&config),
                Err(GenError::InvalidConfig(_))
            ));
        }
    }
}

use blink_core::logmodel::{extract_features, parse_log_str, CachedDatasetRecord, SampleRunLog};
use blink_core::predictor::{fit_runs, predict, prediction_error};
use blink_core::workloadgen::{emit_sample_log, generate_spec, GenConfig};
use proptest::prelude::*;

const SCALES: [f64; 3] = [1.0, 2.0, 3.0];

fn fitted(config: &GenConfig, noise: f64) -> (blink_core::WorkloadSpec, blink_core::ModelFile) {
    let spec = generate_spec(config).unwrap();
    let runs: Vec<_> = SCALES
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let log = emit_sample_log(&spec, s, noise, config.seed * 31 + i as u64);
            // Go through the file format, as the CLI would.
            extract_features(&parse_log_str(&log.to_event_lines()).unwrap())
        })
        .collect();
    (spec.clone(), fit_runs(&runs).unwrap())
}

#[test]
fn noiseless_pipeline_is_exact() {
    for seed in 0..100 {
        let config = GenConfig {
            seed,
            cached_count: 3,
            ..Default::default()
        };
        let (spec, models) = fitted(&config, 0.0);
        for d in spec.datasets.iter().filter(|d| d.cached) {
            let m = &models.datasets[&d.id];
            assert_eq!(
                predict(m, 1000.0),
                d.size.bytes_at(1000.0),
                "seed {seed} {}",
                d.id
            );
            assert!(m.loo_rmse.unwrap() < 1e-6);
        }
        let exec = models.execution_memory.as_ref().unwrap();
        assert_eq!(
            predict(exec, 1000.0),
            spec.execution_memory.bytes_at(1000.0)
        );
    }
}

#[test]
fn noisy_pipeline_is_mostly_within_ten_percent() {
    let mut within = 0;
    for seed in 0..200 {
        let config = GenConfig {
            seed,
            cached_count: 3,
            noise_relative: 0.05,
            ..Default::default()
        };
        let (spec, models) = fitted(&config, 0.05);
        let truth: u64 = spec
            .datasets
            .iter()
            .filter(|d| d.cached)
            .map(|d| d.size.bytes_at(1000.0))
            .sum();
        let predicted: u64 = models.datasets.values().map(|m| predict(m, 1000.0)).sum();
        if prediction_error(predicted, truth).unwrap() <= 0.10 {
            within += 1;
        }
    }
    assert!(within >= 190, "{within}/200 within 10%");
}

#[test]
fn no_cached_data_marks_single_machine() {
    let config = GenConfig {
        cached_count: 0,
        ..Default::default()
    };
    let (_, models) = fitted(&config, 0.0);
    assert!(models.single_machine);
    assert!(models.datasets.is_empty());
}

fn arb_log() -> impl Strategy<Value = SampleRunLog> {
    let dataset = (1u32..20, 0u64..1 << 40, 0u32..20)
        .prop_map(|(parts, size, ev)| (parts, size, ev.min(parts)));
    (
        "[a-z]{1,8}",
        1u32..1_000_000,
        0u64..1 << 50,
        1u32..5000,
        1u32..64,
        proptest::collection::vec(dataset, 0..5),
        0u64..1 << 40,
        proptest::collection::btree_map(0u32..16, 1u64..50, 0..4),
        0u32..1_000_000,
    )
        .prop_map(
            |(app_id, scale, input_bytes, blocks, machines, ds, peak, placements, wall)| {
                let cached_datasets: Vec<_> = ds
                    .into_iter()
                    .enumerate()
                    .map(|(i, (parts, size, ev))| CachedDatasetRecord {
                        dataset_id: format!("rdd_{i}"),
                        total_size: size,
                        partition_count: parts,
                        evicted_partitions: ev,
                    })
                    .collect();
                SampleRunLog {
                    app_id,
                    data_scale: scale as f64 / 1000.0,
                    input_bytes,
                    block_count: blocks,
                    machines,
                    eviction_occurred: cached_datasets.iter().any(|d| d.evicted_partitions > 0),
                    cached_datasets,
                    peak_execution_memory: peak,
                    task_placements: placements,
                    wall_time: wall as f64 / 8.0,
                }
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_round_trip(log in arb_log()) {
        let text = log.to_event_lines();
        let parsed = parse_log_str(&text).unwrap();
        prop_assert_eq!(&parsed, &log);
        prop_assert_eq!(parsed.to_event_lines(), text);
        prop_assert_eq!(extract_features(&parsed), extract_features(&log));
    }
}

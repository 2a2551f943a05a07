use std::collections::BTreeMap;
use std::hint::black_box;

use blink_bench::three_points;
use blink_core::predictor::{fit_nnls, solve_nnls, LinearModel};
use blink_core::selector::{select_cluster_size, MachineProfile};
use criterion::{criterion_group, criterion_main, Criterion};

fn bench_fit(c: &mut Criterion) {
    let input = three_points();
    c.bench_function("solve_nnls", |b| b.iter(|| solve_nnls(black_box(&input))));
    c.bench_function("fit_nnls_with_loo", |b| {
        b.iter(|| fit_nnls(black_box(&input)))
    });
}

fn bench_select(c: &mut Criterion) {
    const GIB: f64 = (1u64 << 30) as f64;
    let models: BTreeMap<String, LinearModel> = (0..8)
        .map(|i| (format!("d{i}"), LinearModel::exact(0.0, 0.005 * GIB)))
        .collect();
    let exec = LinearModel::exact(0.0, 0.012 * GIB);
    let profile = MachineProfile::new(10 << 30, 5 << 30);
    c.bench_function("select_cluster_size", |b| {
        b.iter(|| select_cluster_size(black_box(&models), Some(&exec), 1000.0, &profile))
    });
}

criterion_group!(benches, bench_fit, bench_select);
criterion_main!(benches);

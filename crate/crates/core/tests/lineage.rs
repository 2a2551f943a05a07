use std::collections::{BTreeMap, BTreeSet};

use blink_core::simulator::{computation_counts, fixtures, recompute_counts};
use blink_core::workloadgen::{generate_spec, GenConfig};
use blink_core::WorkloadSpec;
use proptest::prelude::*;

#[test]
fn logistic_regression_counts() {
    let spec = fixtures::logistic_regression();
    let counts = computation_counts(&spec).unwrap();
    assert_eq!(counts["D1"], 8);
    assert_eq!(counts["D2"], 6);
    let recomputed = recompute_counts(&spec, &BTreeSet::new(), true).unwrap();
    let got: Vec<_> = ["D0", "D1", "D2", "D11"]
        .iter()
        .map(|d| recomputed[*d])
        .collect();
    assert_eq!(got, vec![7, 7, 5, 3]);
}

#[test]
fn caching_everything_removes_recomputation() {
    let spec = fixtures::logistic_regression();
    let all: BTreeSet<String> = spec.datasets.iter().map(|d| d.id.clone()).collect();
    let recomputed = recompute_counts(&spec, &all, true).unwrap();
    assert!(recomputed.values().all(|&c| c == 0));
    // Without the fit assumption caching buys nothing.
    let pessimistic = recompute_counts(&spec, &all, false).unwrap();
    assert_eq!(pessimistic["D1"], 7);
}

#[test]
fn caching_cuts_lineage() {
    let spec = fixtures::logistic_regression();
    let cached: BTreeSet<String> = ["D1".to_string()].into();
    let recomputed = recompute_counts(&spec, &cached, true).unwrap();
    assert_eq!(recomputed["D0"], 0);
    assert_eq!(recomputed["D1"], 0);
    assert_eq!(recomputed["D2"], 5);
}

#[test]
fn chain_counts_once() {
    let mut spec = fixtures::logistic_regression();
    spec.datasets.truncate(2);
    spec.actions.truncate(1);
    let counts = computation_counts(&spec).unwrap();
    assert_eq!(counts.values().copied().collect::<Vec<_>>(), vec![1, 1]);
}

#[test]
fn unknown_cached_dataset_is_rejected() {
    let spec = fixtures::logistic_regression();
    let cached: BTreeSet<String> = ["nope".to_string()].into();
    assert!(recompute_counts(&spec, &cached, true).is_err());
}

// Transitive closure by Warshall's algorithm over the parent relation.
fn closure_counts(spec: &WorkloadSpec) -> BTreeMap<String, u64> {
    let n = spec.datasets.len();
    let pos = |id: &str| spec.datasets.iter().position(|d| d.id == id).unwrap();
    let mut anc = vec![vec![false; n]; n];
    for (i, d) in spec.datasets.iter().enumerate() {
        anc[i][i] = true;
        for p in &d.parents {
            anc[i][pos(p)] = true;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if anc[i][k] {
                let via = anc[k].clone();
                for (reach, v) in anc[i].iter_mut().zip(via) {
                    *reach |= v;
                }
            }
        }
    }
    let mut counts: BTreeMap<String, u64> =
        spec.datasets.iter().map(|d| (d.id.clone(), 0)).collect();
    for _ in 0..spec.iterations {
        for a in &spec.actions {
            let s = pos(&a.sink);
            for (j, d) in spec.datasets.iter().enumerate() {
                if anc[s][j] {
                    *counts.get_mut(&d.id).unwrap() += 1;
                }
            }
        }
    }
    counts
}

// Recursive evaluation with a per-action memo and a set of materialized caches.
fn replay_counts(spec: &WorkloadSpec, cached: &BTreeSet<String>) -> BTreeMap<String, u64> {
    fn eval(
        spec: &WorkloadSpec,
        id: &str,
        cached: &BTreeSet<String>,
        done: &mut BTreeSet<String>,
        memo: &mut BTreeSet<String>,
        counts: &mut BTreeMap<String, u64>,
    ) {
        if !memo.insert(id.to_string()) {
            return;
        }
        if cached.contains(id) && done.contains(id) {
            return;
        }
        *counts.entry(id.to_string()).or_default() += 1;
        let node = spec.datasets.iter().find(|d| d.id == id).unwrap();
        for p in &node.parents {
            eval(spec, p, cached, done, memo, counts);
        }
    }
    let mut counts: BTreeMap<String, u64> =
        spec.datasets.iter().map(|d| (d.id.clone(), 0)).collect();
    let mut done = BTreeSet::new();
    for _ in 0..spec.iterations {
        for a in &spec.actions {
            let mut memo = BTreeSet::new();
            eval(spec, &a.sink, cached, &mut done, &mut memo, &mut counts);
            for id in memo {
                if cached.contains(&id) {
                    done.insert(id);
                }
            }
        }
    }
    counts
        .into_iter()
        .map(|(k, v)| (k, v.saturating_sub(1)))
        .collect()
}

proptest! {
    #[test]
    fn random_dags_match_closure_and_replay(seed in 0u64..10_000, n in 1usize..14, k in 0usize..5) {
        let config = GenConfig {
            seed,
            n_datasets: n,
            cached_count: k.min(n),
            iterations: 2,
            ..Default::default()
        };
        let spec = generate_spec(&config).unwrap();
        prop_assert_eq!(computation_counts(&spec).unwrap(), closure_counts(&spec));
        let cached: BTreeSet<String> =
            spec.datasets.iter().filter(|d| d.cached).map(|d| d.id.clone()).collect();
        prop_assert_eq!(recompute_counts(&spec, &cached, true).unwrap(), replay_counts(&spec, &cached));
        let none = BTreeSet::new();
        let uncached = recompute_counts(&spec, &none, true).unwrap();
        let closure = closure_counts(&spec);
        for (id, c) in uncached {
            prop_assert_eq!(c, closure[&id].saturating_sub(1));
        }
    }
}

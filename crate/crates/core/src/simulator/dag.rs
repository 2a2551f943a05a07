//! Merged-DAG lineage: how often each dataset is computed.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::toposort;
use petgraph::graph::DiGraph;

use super::{Result, SimError, WorkloadSpec};

/// Index view of a validated workload DAG.
#[derive(Debug, Clone)]
pub struct Dag {
    pub ids: Vec<String>,
    pub parents: Vec<Vec<usize>>,
    /// Dataset indices, parents before children.
    pub topo: Vec<usize>,
    /// Sink index of each action, in execution order (one pass).
    pub sinks: Vec<usize>,
}

impl Dag {
    pub fn build(spec: &WorkloadSpec) -> Result<Dag> {
        let mut index = BTreeMap::new();
        for (i, d) in spec.datasets.iter().enumerate() {
            if index.insert(d.id.as_str(), i).is_some() {
                return Err(SimError::InvalidSpec(format!(
                    "duplicate dataset id `{}`",
                    d.id
                )));
            }
        }
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| SimError::UnknownDataset(id.to_string()))
        };
        let mut parents = Vec::with_capacity(spec.datasets.len());
        for d in &spec.datasets {
            parents.push(
                d.parents
                    .iter()
                    .map(|p| lookup(p))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        let mut graph = DiGraph::<usize, ()>::new();
        let nodes: Vec<_> = (0..spec.datasets.len())
            .map(|i| graph.add_node(i))
            .collect();
        for (child, ps) in parents.iter().enumerate() {
            for &p in ps {
                graph.add_edge(nodes[p], nodes[child], ());
            }
        }
        let topo = toposort(&graph, None)
            .map_err(|cycle| SimError::CyclicDag(spec.datasets[graph[cycle.node_id()]].id.clone()))?
            .into_iter()
            .map(|n| graph[n])
            .collect();
        let sinks = spec
            .actions
            .iter()
            .map(|a| lookup(&a.sink))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dag {
            ids: spec.datasets.iter().map(|d| d.id.clone()).collect(),
            parents,
            topo,
            sinks,
        })
    }

    /// Membership mask of `sink` and all of its ancestors.
    pub fn lineage(&self, sink: usize) -> Vec<bool> {
        let mut seen = vec![false; self.ids.len()];
        let mut stack = vec![sink];
        while let Some(d) = stack.pop() {
            if !std::mem::replace(&mut seen[d], true) {
                stack.extend(&self.parents[d]);
            }
        }
        seen
    }
}

/// Number of action executions whose lineage contains each dataset.
pub fn computation_counts(spec: &WorkloadSpec) -> Result<BTreeMap<String, u64>> {
    let dag = Dag::build(spec)?;
    let mut counts = vec![0u64; dag.ids.len()];
    for &sink in &dag.sinks {
        for (d, inside) in dag.lineage(sink).into_iter().enumerate() {
            counts[d] += u64::from(inside);
        }
    }
    let iterations = spec.iterations as u64;
    Ok(dag
        .ids
        .into_iter()
        .zip(counts)
        .map(|(id, c)| (id, c * iterations))
        .collect())
}

/// Recomputations per dataset when the datasets in `cached` are kept in
/// memory after their first computation. A materialized cached dataset cuts
/// the lineage walk, so its uncached ancestors are not recomputed either.
/// With `assume_fit = false` nothing is assumed to stay cached.
pub fn recompute_counts(
    spec: &WorkloadSpec,
    cached: &BTreeSet<String>,
    assume_fit: bool,
) -> Result<BTreeMap<String, u64>> {
    let dag = Dag::build(spec)?;
    for id in cached {
        if !dag.ids.contains(id) {
            return Err(SimError::UnknownDataset(id.clone()));
        }
    }
    let is_cached: Vec<bool> = dag
        .ids
        .iter()
        .map(|id| assume_fit && cached.contains(id))
        .collect();
    let mut materialized = vec![false; dag.ids.len()];
    let mut computed = vec![0u64; dag.ids.len()];
    for _ in 0..spec.iterations {
        for &sink in &dag.sinks {
            let mut visited = vec![false; dag.ids.len()];
            let mut stack = vec![sink];
            while let Some(d) = stack.pop() {
                if std::mem::replace(&mut visited[d], true) {
                    continue;
                }
                if is_cached[d] && materialized[d] {
                    continue;
                }
                computed[d] += 1;
                stack.extend(&dag.parents[d]);
            }
            for (d, &v) in visited.iter().enumerate() {
                if v && is_cached[d] {
                    materialized[d] = true;
                }
            }
        }
    }
    Ok(dag
        .ids
        .into_iter()
        .zip(computed)
        .map(|(id, c)| (id, c.saturating_sub(1)))
        .collect())
}

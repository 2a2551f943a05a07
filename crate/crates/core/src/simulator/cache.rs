//! Per-machine partition cache with a byte budget and LRU eviction.

use lru::LruCache;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    /// First computation of the partition.
    Materialize,
    Hit,
    /// The partition was evicted earlier and is recomputed from lineage.
    Miss,
}

#[derive(Debug)]
pub struct MachineCache {
    capacity: f64,
    used: u64,
    // Unbounded by entry count; the byte budget drives eviction.
    entries: LruCache<usize, u64>,
    materialized: Vec<bool>,
}

impl MachineCache {
    /// `partitions` is the size of the global partition index space.
    pub fn new(capacity: f64, partitions: usize) -> Self {
        MachineCache {
            capacity,
            used: 0,
            entries: LruCache::unbounded(),
            materialized: vec![false; partitions],
        }
    }

    pub fn access(&mut self, partition: usize, size: u64) -> Access {
        if self.entries.get(&partition).is_some() {
            return Access::Hit;
        }
        let outcome = if std::mem::replace(&mut self.materialized[partition], true) {
            Access::Miss
        } else {
            Access::Materialize
        };
        if size as f64 <= self.capacity {
            while (self.used + size) as f64 > self.capacity {
                let (_, evicted) = self.entries.pop_lru().expect("used bytes imply an entry");
                self.used -= evicted;
            }
            self.entries.put(partition, size);
            self.used += size;
        }
        outcome
    }

    pub fn resident(&self) -> usize {
        self.entries.len()
    }

    pub fn materialized(&self) -> usize {
        self.materialized.iter().filter(|&&m| m).count()
    }
}

//! Sample-run log schema, parser and feature extraction.
//!
//! A log is UTF-8 text with one JSON object per line. Every object carries an
//! `event` tag:
//!
//! | event               | fields                                                    |
//! |---------------------|-----------------------------------------------------------|
//! | `run_start`         | `app_id`, `data_scale`, `input_bytes`, `block_count`, `machines` |
//! | `dataset_cached`    | `dataset_id`, `partition_id`, `size_bytes`                |
//! | `partition_evicted` | `dataset_id`, `partition_id`                              |
//! | `stage_completed`   | `stage_id`, `peak_execution_memory_bytes`                 |
//! | `task_end`          | `machine_id`                                              |
//! | `run_end`           | `wall_time_seconds`                                       |
//!
//! Unknown event kinds are counted and skipped. Blank lines are ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::size::Bytes;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("malformed log at line {line}: {message}")]
    MalformedLog { line: usize, message: String },
    #[error("inconsistent log: {0}")]
    InconsistentLog(String),
    #[error("i/o error reading log: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LogError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachedDatasetRecord {
    pub dataset_id: String,
    pub total_size: Bytes,
    pub partition_count: u32,
    pub evicted_partitions: u32,
}

/// Everything recorded about one sample run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRunLog {
    pub app_id: String,
    pub data_scale: f64,
    pub input_bytes: Bytes,
    pub block_count: u32,
    pub machines: u32,
    pub cached_datasets: Vec<CachedDatasetRecord>,
    pub peak_execution_memory: Bytes,
    pub eviction_occurred: bool,
    pub task_placements: BTreeMap<u32, u64>,
    pub wall_time: f64,
}

/// Model inputs extracted from one log.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFeatures {
    pub data_scale: f64,
    pub per_dataset_size: BTreeMap<String, Bytes>,
    pub execution_memory: Bytes,
    pub eviction_occurred: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    RunStart {
        app_id: String,
        data_scale: f64,
        input_bytes: Bytes,
        block_count: u32,
        machines: u32,
    },
    DatasetCached {
        dataset_id: String,
        partition_id: u32,
        size_bytes: Bytes,
    },
    PartitionEvicted {
        dataset_id: String,
        partition_id: u32,
    },
    StageCompleted {
        stage_id: u32,
        peak_execution_memory_bytes: Bytes,
    },
    TaskEnd {
        machine_id: u32,
    },
    RunEnd {
        wall_time_seconds: f64,
    },
}

const KNOWN_EVENTS: [&str; 6] = [
    "run_start",
    "dataset_cached",
    "partition_evicted",
    "stage_completed",
    "task_end",
    "run_end",
];

/// A parsed log together with parse diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLog {
    pub log: SampleRunLog,
    /// Lines whose `event` kind was not recognized.
    pub unknown_events: usize,
}

#[derive(Default)]
struct DatasetAcc {
    partitions: BTreeMap<u32, Bytes>,
    evicted: BTreeSet<u32>,
}

/// Parses and validates a log from a reader.
pub fn parse_log<R: BufRead>(reader: R) -> Result<ParsedLog> {
    let mut start: Option<(String, f64, Bytes, u32, u32)> = None;
    let mut wall_time: Option<f64> = None;
    let mut peak: Bytes = 0;
    let mut placements: BTreeMap<u32, u64> = BTreeMap::new();
    // Insertion order of datasets is preserved in the output.
    let mut order: Vec<String> = Vec::new();
    let mut datasets: BTreeMap<String, DatasetAcc> = BTreeMap::new();
    let mut evictions: Vec<(usize, String, u32)> = Vec::new();
    let mut unknown_events = 0;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| LogError::MalformedLog {
            line: line_no,
            message,
        };
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let kind = value
            .get("event")
            .and_then(|v| v.as_str())
            .ok_or_else(|| malformed("missing string field `event`".into()))?;
        if !KNOWN_EVENTS.contains(&kind) {
            log::warn!("line {line_no}: skipping unknown event kind `{kind}`");
            unknown_events += 1;
            continue;
        }
        let event: Event = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
        match event {
            Event::RunStart {
                app_id,
                data_scale,
                input_bytes,
                block_count,
                machines,
            } => {
                if start.is_some() {
                    return Err(malformed("duplicate run_start".into()));
                }
                start = Some((app_id, data_scale, input_bytes, block_count, machines));
            }
            Event::DatasetCached {
                dataset_id,
                partition_id,
                size_bytes,
            } => {
                if !datasets.contains_key(&dataset_id) {
                    order.push(dataset_id.clone());
                }
                // A partition cached again after eviction keeps its latest size.
                datasets
                    .entry(dataset_id)
                    .or_default()
                    .partitions
                    .insert(partition_id, size_bytes);
            }
            Event::PartitionEvicted {
                dataset_id,
                partition_id,
            } => evictions.push((line_no, dataset_id, partition_id)),
            Event::StageCompleted {
                peak_execution_memory_bytes,
                ..
            } => peak = peak.max(peak_execution_memory_bytes),
            Event::TaskEnd { machine_id } => *placements.entry(machine_id).or_default() += 1,
            Event::RunEnd { wall_time_seconds } => {
                if wall_time.is_some() {
                    return Err(malformed("duplicate run_end".into()));
                }
                wall_time = Some(wall_time_seconds);
            }
        }
    }

    let (app_id, data_scale, input_bytes, block_count, machines) =
        start.ok_or_else(|| LogError::MalformedLog {
            line: 0,
            message: "missing run_start event".into(),
        })?;
    let wall_time = wall_time.ok_or_else(|| LogError::MalformedLog {
        line: 0,
        message: "missing run_end event".into(),
    })?;

    for (line_no, dataset_id, partition_id) in evictions {
        let acc = datasets.get_mut(&dataset_id).ok_or_else(|| {
            LogError::InconsistentLog(format!(
                "line {line_no}: eviction of never-cached dataset `{dataset_id}`"
            ))
        })?;
        acc.evicted.insert(partition_id);
    }

    let cached_datasets = order
        .into_iter()
        .map(|id| {
            let acc = &datasets[&id];
            CachedDatasetRecord {
                total_size: acc.partitions.values().sum(),
                partition_count: acc.partitions.len() as u32,
                evicted_partitions: acc.evicted.len() as u32,
                dataset_id: id,
            }
        })
        .collect::<Vec<_>>();

    let log = SampleRunLog {
        app_id,
        data_scale,
        input_bytes,
        block_count,
        machines,
        eviction_occurred: cached_datasets.iter().any(|d| d.evicted_partitions > 0),
        cached_datasets,
        peak_execution_memory: peak,
        task_placements: placements,
        wall_time,
    };
    log.validate()?;
    Ok(ParsedLog {
        log,
        unknown_events,
    })
}

/// Parses a log held in memory.
pub fn parse_log_str(text: &str) -> Result<SampleRunLog> {
    parse_log(text.as_bytes()).map(|p| p.log)
}

impl SampleRunLog {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LogError::InconsistentLog(m));
        if !(self.data_scale > 0.0 && self.data_scale.is_finite()) {
            return bad(format!(
                "data_scale must be positive, got {}",
                self.data_scale
            ));
        }
        if self.block_count < 1 {
            return bad("block_count must be at least 1".into());
        }
        if self.machines < 1 {
            return bad("machines must be at least 1".into());
        }
        if !(self.wall_time >= 0.0) {
            return bad(format!("negative wall time {}", self.wall_time));
        }
        let mut seen = BTreeSet::new();
        for d in &self.cached_datasets {
            if !seen.insert(d.dataset_id.as_str()) {
                return bad(format!("duplicate dataset id `{}`", d.dataset_id));
            }
            if d.partition_count < 1 {
                return bad(format!("dataset `{}` has no partitions", d.dataset_id));
            }
            if d.evicted_partitions > d.partition_count {
                return bad(format!(
                    "dataset `{}`: {} evicted partitions but only {} cached",
                    d.dataset_id, d.evicted_partitions, d.partition_count
                ));
            }
        }
        let any_evicted = self
            .cached_datasets
            .iter()
            .any(|d| d.evicted_partitions > 0);
        if any_evicted != self.eviction_occurred {
            return bad("eviction_occurred disagrees with per-dataset evictions".into());
        }
        Ok(())
    }

    /// Renders the log in the line-oriented event format. Partition sizes are
    /// split as evenly as possible with the remainder on the lowest ids, so
    /// parsing the output yields an equal log.
    pub fn to_event_lines(&self) -> String {
        let mut events = vec![Event::RunStart {
            app_id: self.app_id.clone(),
            data_scale: self.data_scale,
            input_bytes: self.input_bytes,
            block_count: self.block_count,
            machines: self.machines,
        }];
        for d in &self.cached_datasets {
            let parts = d.partition_count as u64;
            let base = d.total_size / parts;
            let extra = d.total_size % parts;
            for p in 0..d.partition_count {
                events.push(Event::DatasetCached {
                    dataset_id: d.dataset_id.clone(),
                    partition_id: p,
                    size_bytes: base + u64::from((p as u64) < extra),
                });
            }
        }
        for d in &self.cached_datasets {
            for p in 0..d.evicted_partitions {
                events.push(Event::PartitionEvicted {
                    dataset_id: d.dataset_id.clone(),
                    partition_id: p,
                });
            }
        }
        events.push(Event::StageCompleted {
            stage_id: 0,
            peak_execution_memory_bytes: self.peak_execution_memory,
        });
        for (&machine_id, &count) in &self.task_placements {
            for _ in 0..count {
                events.push(Event::TaskEnd { machine_id });
            }
        }
        events.push(Event::RunEnd {
            wall_time_seconds: self.wall_time,
        });
        let mut out = String::new();
        for e in events {
            out.push_str(&serde_json::to_string(&e).expect("event serializes"));
            out.push('\n');
        }
        out
    }
}

/// Projects a log onto the features the size and memory models consume.
pub fn extract_features(log: &SampleRunLog) -> RunFeatures {
    RunFeatures {
        data_scale: log.data_scale,
        per_dataset_size: log
            .cached_datasets
            .iter()
            .map(|d| (d.dataset_id.clone(), d.total_size))
            .collect(),
        execution_memory: log.peak_execution_memory,
        eviction_occurred: log.eviction_occurred,
    }
}

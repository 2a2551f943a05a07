//! Planning and monitoring of single-machine sample runs.
//!
//! Sample runs keep the number of tasks proportional to the data scale. When
//! the input has enough blocks, a sample is a subset of whole blocks
//! ([`SampleMethod::BlockN`]); otherwise every block is shrunk so the block
//! count, and therefore the parallelism, stays that of the full input
//! ([`SampleMethod::BlockS`]).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logmodel::SampleRunLog;
use crate::size::{Bytes, FULL_SCALE};

/// Default sample fractions: 0.1%, 0.2% and 0.3% of the input.
pub const DEFAULT_SCALES: [f64; 3] = [0.001, 0.002, 0.003];
/// Relative leave-one-out error above which more sample runs are requested.
pub const DEFAULT_ADAPTIVE_THRESHOLD: f64 = 0.30;
/// Reruns at lower scales allowed before giving up.
pub const DEFAULT_MAX_RERUNS: u32 = 3;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("invalid scale list: {0}")]
    InvalidScale(String),
    #[error("input is empty")]
    EmptyInput,
    #[error("block size must be positive")]
    InvalidBlockSize,
    #[error("adaptive threshold must be positive, got {0}")]
    ThresholdInvalid(f64),
    #[error("eviction persisted after {0} reruns at lower scales")]
    RerunsExhausted(u32),
}

pub type Result<T> = std::result::Result<T, SamplerError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleMethod {
    #[serde(rename = "BLOCK_N")]
    BlockN,
    #[serde(rename = "BLOCK_S")]
    BlockS,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub method: SampleMethod,
    /// Fractions of the full input, strictly increasing in (0, 1).
    pub scales: Vec<f64>,
    /// Whole blocks per sample run (block-count sampling only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_scale_blocks: Option<Vec<u64>>,
    /// Shrunken block size per sample run (block-size sampling only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_scale_block_size: Option<Vec<Bytes>>,
    pub machines: u32,
    pub total_bytes: Bytes,
    pub total_blocks: u64,
}

impl SamplePlan {
    /// Sample scales in model units (full input = 1000).
    pub fn model_scales(&self) -> Vec<f64> {
        self.scales.iter().map(|s| s * FULL_SCALE).collect()
    }
}

fn validate_scales(scales: &[f64]) -> Result<()> {
    if scales.is_empty() {
        return Err(SamplerError::InvalidScale("no scales given".into()));
    }
    for &s in scales {
        if !(s > 0.0 && s < 1.0) {
            return Err(SamplerError::InvalidScale(format!(
                "scale {s} outside (0, 1)"
            )));
        }
    }
    if scales.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SamplerError::InvalidScale(
            "scales must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Block counts proportional to the scales, anchored on the smallest one.
fn proportional_blocks(scales: &[f64], total_blocks: u64) -> Vec<u64> {
    let base = (scales[0] * total_blocks as f64).round();
    scales
        .iter()
        .map(|s| (base * s / scales[0]).round() as u64)
        .collect()
}

fn shrunken_block_sizes(scales: &[f64], total_bytes: Bytes, total_blocks: u64) -> Vec<Bytes> {
    scales
        .iter()
        .map(|s| ((s * total_bytes as f64 / total_blocks as f64).round() as Bytes).max(1))
        .collect()
}

/// Chooses the sampling method and per-run block geometry. Sample runs
/// always use one machine.
pub fn plan_samples(total_bytes: Bytes, block_size: Bytes, scales: &[f64]) -> Result<SamplePlan> {
    if total_bytes == 0 {
        return Err(SamplerError::EmptyInput);
    }
    if block_size == 0 {
        return Err(SamplerError::InvalidBlockSize);
    }
    validate_scales(scales)?;
    let total_blocks = total_bytes.div_ceil(block_size);
    let blocks = proportional_blocks(scales, total_blocks);
    let distinct = blocks.windows(2).all(|w| w[0] < w[1]);
    let (method, per_scale_blocks, per_scale_block_size) = if blocks[0] >= 1 && distinct {
        (SampleMethod::BlockN, Some(blocks), None)
    } else {
        (
            SampleMethod::BlockS,
            None,
            Some(shrunken_block_sizes(scales, total_bytes, total_blocks)),
        )
    };
    Ok(SamplePlan {
        method,
        scales: scales.to_vec(),
        per_scale_blocks,
        per_scale_block_size,
        machines: 1,
        total_bytes,
        total_blocks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MonitorDecision {
    Continue,
    RecommendSingleMachine,
    RerunLowerScale { scales: Vec<f64> },
}

/// Reacts to a finished sample run: no cached data means one machine is
/// enough; an eviction means the samples were too large.
pub fn monitor_sample_run(log: &SampleRunLog, current_scales: &[f64]) -> MonitorDecision {
    if log.cached_datasets.is_empty() {
        MonitorDecision::RecommendSingleMachine
    } else if log.eviction_occurred {
        MonitorDecision::RerunLowerScale {
            scales: current_scales.iter().map(|s| s / 2.0).collect(),
        }
    } else {
        MonitorDecision::Continue
    }
}

/// Stateful wrapper around [`monitor_sample_run`] that bounds the number of
/// reruns.
#[derive(Debug, Clone)]
pub struct SampleRunMonitor {
    max_reruns: u32,
    reruns: u32,
}

impl Default for SampleRunMonitor {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_RERUNS)
    }
}

impl SampleRunMonitor {
    pub fn new(max_reruns: u32) -> Self {
        SampleRunMonitor {
            max_reruns,
            reruns: 0,
        }
    }

    pub fn observe(
        &mut self,
        log: &SampleRunLog,
        current_scales: &[f64],
    ) -> Result<MonitorDecision> {
        let decision = monitor_sample_run(log, current_scales);
        if let MonitorDecision::RerunLowerScale { .. } = decision {
            if self.reruns >= self.max_reruns {
                return Err(SamplerError::RerunsExhausted(self.reruns));
            }
            self.reruns += 1;
        }
        Ok(decision)
    }

    pub fn reruns(&self) -> u32 {
        self.reruns
    }
}

/// Result of one adaptive-sampling step.
#[derive(Debug, Clone, PartialEq)]
pub struct Extension {
    pub plan: SamplePlan,
    /// Scales appended by this step.
    pub added: usize,
    /// The error is above threshold but the plan is already at `max_runs`.
    pub saturated: bool,
}

/// Appends the next scale of the plan's arithmetic progression when the
/// cross-validation error is above `threshold`. One call adds at most one
/// run; callers fit again after running it and call back.
pub fn adaptive_extend(
    plan: &SamplePlan,
    cv_relative_error: f64,
    threshold: f64,
    max_runs: usize,
) -> Result<Extension> {
    if !(threshold > 0.0) {
        return Err(SamplerError::ThresholdInvalid(threshold));
    }
    if plan.scales.len() < 2 {
        return Err(SamplerError::InvalidScale(
            "adaptive sampling needs at least 2 scales".into(),
        ));
    }
    if cv_relative_error <= threshold {
        return Ok(Extension {
            plan: plan.clone(),
            added: 0,
            saturated: false,
        });
    }
    if plan.scales.len() >= max_runs {
        return Ok(Extension {
            plan: plan.clone(),
            added: 0,
            saturated: true,
        });
    }
    let step = plan.scales[1] - plan.scales[0];
    let next = plan.scales[plan.scales.len() - 1] + step;
    if next >= 1.0 {
        return Ok(Extension {
            plan: plan.clone(),
            added: 0,
            saturated: true,
        });
    }
    let mut scales = plan.scales.clone();
    scales.push(next);
    let mut extended = plan.clone();
    match plan.method {
        SampleMethod::BlockN => {
            extended.per_scale_blocks = Some(proportional_blocks(&scales, plan.total_blocks));
        }
        SampleMethod::BlockS => {
            extended.per_scale_block_size = Some(shrunken_block_sizes(
                &scales,
                plan.total_bytes,
                plan.total_blocks,
            ));
        }
    }
    extended.scales = scales;
    Ok(Extension {
        plan: extended,
        added: 1,
        saturated: false,
    })
}

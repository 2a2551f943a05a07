//! Non-negative linear models of size versus data scale.
//!
//! Both the cached-dataset size model and the execution-memory model take the
//! form `intercept + slope * scale` with both coefficients constrained to be
//! non-negative. With only two parameters the constrained least-squares
//! problem is solved exactly by enumerating the four active sets (free,
//! `slope = 0`, `intercept = 0`, both zero), each of which has a closed form.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logmodel::RunFeatures;
use crate::size::{Bytes, SizeFn};

#[derive(Debug, Error, PartialEq)]
pub enum PredictorError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("actual value is zero; relative error undefined")]
    ZeroActual,
    #[error("invalid point: {0}")]
    InvalidPoint(String),
}

pub type Result<T> = std::result::Result<T, PredictorError>;

/// Training points `(scale, label)` for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct FitInput {
    points: Vec<(f64, f64)>,
}

impl FitInput {
    /// Validates that labels are non-negative, scales finite and pairwise distinct.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        for &(scale, label) in &points {
            if !scale.is_finite() || !label.is_finite() {
                return Err(PredictorError::InvalidPoint(format!(
                    "non-finite point ({scale}, {label})"
                )));
            }
            if label < 0.0 {
                return Err(PredictorError::InvalidPoint(format!(
                    "negative label {label} at scale {scale}"
                )));
            }
        }
        for (i, a) in points.iter().enumerate() {
            if points[..i].iter().any(|b| b.0 == a.0) {
                return Err(PredictorError::DegenerateInput(format!(
                    "duplicate scale {}",
                    a.0
                )));
            }
        }
        Ok(FitInput { points })
    }

    pub fn from_bytes(points: impl IntoIterator<Item = (f64, Bytes)>) -> Result<Self> {
        Self::new(points.into_iter().map(|(s, b)| (s, b as f64)).collect())
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn without(&self, skip: usize) -> FitInput {
        let points = self
            .points
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != skip)
            .map(|(_, p)| *p)
            .collect();
        FitInput { points }
    }
}

/// Fitted `intercept + slope * scale` with leave-one-out diagnostics.
///
/// The diagnostics are absent when the model was fitted from only two points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub slope: f64,
    pub loo_rmse: Option<f64>,
    pub loo_relative_error: Option<f64>,
}

impl LinearModel {
    /// A model with known coefficients and no cross-validation data.
    pub fn exact(intercept: f64, slope: f64) -> Self {
        LinearModel {
            intercept,
            slope,
            loo_rmse: None,
            loo_relative_error: None,
        }
    }

    pub fn size_fn(&self) -> SizeFn {
        SizeFn::new(self.intercept, self.slope)
    }
}

impl From<SizeFn> for LinearModel {
    fn from(f: SizeFn) -> Self {
        LinearModel::exact(f.intercept, f.slope)
    }
}

/// Coefficients minimizing the squared residuals under `intercept, slope >= 0`.
pub fn solve_nnls(input: &FitInput) -> Result<(f64, f64)> {
    if input.len() < 2 {
        return Err(PredictorError::DegenerateInput(format!(
            "need at least 2 points with distinct scales, got {}",
            input.len()
        )));
    }
    let pts = input.points();
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let sum_xx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sum_xy: f64 = pts.iter().map(|p| p.0 * p.1).sum();

    let mut candidates = Vec::with_capacity(4);
    // Interior: ordinary least squares.
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    if slope >= 0.0 && intercept >= 0.0 {
        candidates.push((intercept, slope));
    }
    // Line through the origin.
    if sum_xy >= 0.0 {
        candidates.push((0.0, sum_xy / sum_xx));
    }
    // Constant.
    candidates.push((mean_y.max(0.0), 0.0));
    candidates.push((0.0, 0.0));

    let sse = |(a, b): (f64, f64)| -> f64 { pts.iter().map(|p| (a + b * p.0 - p.1).powi(2)).sum() };
    let best = candidates
        .into_iter()
        .map(|c| (sse(c), c))
        .fold(None::<(f64, (f64, f64))>, |acc, cur| match acc {
            Some(a) if a.0 <= cur.0 => Some(a),
            _ => Some(cur),
        })
        .map(|(_, c)| c)
        .expect("at least one feasible candidate");
    Ok(best)
}

/// Fits a non-negative model; fills leave-one-out diagnostics when at least
/// three points are available.
pub fn fit_nnls(input: &FitInput) -> Result<LinearModel> {
    let (intercept, slope) = solve_nnls(input)?;
    let (loo_rmse, loo_relative_error) = if input.len() >= 3 {
        let (rmse, rel) = loo_cv(input)?;
        (Some(rmse), Some(rel))
    } else {
        (None, None)
    };
    Ok(LinearModel {
        intercept,
        slope,
        loo_rmse,
        loo_relative_error,
    })
}

/// Leave-one-out cross-validation. Returns `(rmse, rmse / mean(labels))`;
/// the relative error is 0 when every label is 0.
pub fn loo_cv(input: &FitInput) -> Result<(f64, f64)> {
    if input.len() < 3 {
        return Err(PredictorError::DegenerateInput(format!(
            "leave-one-out needs at least 3 points, got {}",
            input.len()
        )));
    }
    let mut sq_sum = 0.0;
    for (i, &(scale, label)) in input.points().iter().enumerate() {
        let (a, b) = solve_nnls(&input.without(i))?;
        sq_sum += (a + b * scale - label).powi(2);
    }
    let n = input.len() as f64;
    let rmse = (sq_sum / n).sqrt();
    let mean_label = input.points().iter().map(|p| p.1).sum::<f64>() / n;
    let relative = if mean_label > 0.0 {
        rmse / mean_label
    } else {
        0.0
    };
    Ok((rmse, relative))
}

/// `intercept + slope * scale`, rounded half-up to bytes.
pub fn predict(model: &LinearModel, scale: f64) -> Bytes {
    model.size_fn().bytes_at(scale)
}

/// `|predicted - actual| / actual`.
pub fn prediction_error(predicted: Bytes, actual: Bytes) -> Result<f64> {
    if actual == 0 {
        return Err(PredictorError::ZeroActual);
    }
    Ok(predicted.abs_diff(actual) as f64 / actual as f64)
}

/// Fits one size model per cached dataset and one execution-memory model
/// from the features of several sample runs.
pub fn fit_runs(runs: &[RunFeatures]) -> Result<ModelFile> {
    let mut per_dataset: BTreeMap<&str, Vec<(f64, Bytes)>> = BTreeMap::new();
    for run in runs {
        for (id, &size) in &run.per_dataset_size {
            per_dataset
                .entry(id)
                .or_default()
                .push((run.data_scale, size));
        }
    }
    let mut datasets = BTreeMap::new();
    for (id, points) in per_dataset {
        if ModelFile::reserved_id(id) {
            return Err(PredictorError::InvalidPoint(format!(
                "dataset id `{id}` is reserved"
            )));
        }
        datasets.insert(id.to_string(), fit_nnls(&FitInput::from_bytes(points)?)?);
    }
    let exec = FitInput::from_bytes(runs.iter().map(|r| (r.data_scale, r.execution_memory)))?;
    Ok(ModelFile {
        single_machine: datasets.is_empty(),
        datasets,
        execution_memory: Some(fit_nnls(&exec)?),
        sample_cost: 0.0,
    })
}

impl ModelFile {
    /// Worst leave-one-out relative error across all models.
    pub fn max_relative_error(&self) -> Option<f64> {
        self.datasets
            .values()
            .chain(self.execution_memory.iter())
            .filter_map(|m| m.loo_relative_error)
            .fold(None, |acc: Option<f64>, e| {
                Some(acc.map_or(e, |a| a.max(e)))
            })
    }
}

/// Key under which the execution-memory model is stored in a [`ModelFile`].
pub const EXECUTION_MEMORY_KEY: &str = "execution_memory";
const SCALE_CONVENTION_KEY: &str = "scale_convention";
const SAMPLE_COST_KEY: &str = "sample_cost_machine_s";
const SINGLE_MACHINE_KEY: &str = "single_machine";
/// Value of `scale_convention` in every model file.
pub const SCALE_CONVENTION: &str = "full=1000";

/// All fitted models of one application, as written by `fit`.
///
/// Serialized as a flat JSON object: one entry per cached dataset id, plus
/// the reserved keys `execution_memory`, `scale_convention`,
/// `sample_cost_machine_s` and `single_machine`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub datasets: BTreeMap<String, LinearModel>,
    pub execution_memory: Option<LinearModel>,
    /// Machine-seconds spent on the sample runs that produced the models.
    pub sample_cost: f64,
    /// Set when the sample runs cached nothing; the application should run on
    /// one machine.
    pub single_machine: bool,
}

fn is_reserved(key: &str) -> bool {
    matches!(
        key,
        EXECUTION_MEMORY_KEY | SCALE_CONVENTION_KEY | SAMPLE_COST_KEY | SINGLE_MACHINE_KEY
    )
}

impl ModelFile {
    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (id, model) in &self.datasets {
            map.insert(
                id.clone(),
                serde_json::to_value(model).expect("model serializes"),
            );
        }
        map.insert(
            EXECUTION_MEMORY_KEY.into(),
            serde_json::to_value(self.execution_memory).expect("model serializes"),
        );
        map.insert(SCALE_CONVENTION_KEY.into(), SCALE_CONVENTION.into());
        map.insert(SAMPLE_COST_KEY.into(), self.sample_cost.into());
        map.insert(SINGLE_MACHINE_KEY.into(), self.single_machine.into());
        serde_json::Value::Object(map)
    }

    pub fn from_json(value: &serde_json::Value) -> std::result::Result<Self, String> {
        let map = value
            .as_object()
            .ok_or("model file must be a JSON object")?;
        match map.get(SCALE_CONVENTION_KEY).and_then(|v| v.as_str()) {
            Some(SCALE_CONVENTION) => {}
            other => return Err(format!("unsupported scale_convention {other:?}")),
        }
        let execution_memory = match map.get(EXECUTION_MEMORY_KEY) {
            None | Some(serde_json::Value::Null) => None,
            Some(v) => Some(
                serde_json::from_value::<LinearModel>(v.clone())
                    .map_err(|e| format!("execution_memory: {e}"))?,
            ),
        };
        let sample_cost = map
            .get(SAMPLE_COST_KEY)
            .and_then(|v| v.as_f64())
            .unwrap_or(0.0);
        let single_machine = map
            .get(SINGLE_MACHINE_KEY)
            .and_then(|v| v.as_bool())
            .unwrap_or(false);
        let mut datasets = BTreeMap::new();
        for (key, v) in map.iter().filter(|(k, _)| !is_reserved(k)) {
            let model: LinearModel =
                serde_json::from_value(v.clone()).map_err(|e| format!("dataset {key}: {e}"))?;
            if !model.size_fn().is_non_negative() {
                return Err(format!("dataset {key}: negative coefficient"));
            }
            datasets.insert(key.clone(), model);
        }
        Ok(ModelFile {
            datasets,
            execution_memory,
            sample_cost,
            single_machine,
        })
    }

    /// True when a dataset id would collide with a reserved key.
    pub fn reserved_id(id: &str) -> bool {
        is_reserved(id)
    }
}

//! The `blink` command line: sample planning, model fitting, cluster sizing
//! and simulation over JSON files.
//!
//! Machine-readable output goes to the `out` writer (stdout in the binary),
//! diagnostics to `err`. Every command is a pure function of its input files
//! and flags.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use blink_core::accounting::{sample_runs_cost, CostAccount};
use blink_core::logmodel::{extract_features, parse_log, LogError, SampleRunLog};
use blink_core::predictor::{fit_runs, ModelFile, PredictorError};
use blink_core::sampler::{
    adaptive_extend, monitor_sample_run, plan_samples, MonitorDecision, SamplerError,
    DEFAULT_ADAPTIVE_THRESHOLD, DEFAULT_SCALES,
};
use blink_core::selector::{
    cluster_bounds, select_cluster_size, skew_adjusted_check, DemandModel, MachineProfile,
    SelectorError, DEFAULT_GRANULARITY,
};
use blink_core::simulator::{self, fixtures, Placement, SimError, WorkloadSpec};
use blink_core::workloadgen::{emit_sample_log, generate_spec, GenConfig, GenError};
use blink_core::{Bytes, FULL_SCALE};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("writing output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    /// 2 for usage and validation errors, 3 for data errors, 4 when the
    /// question has no finite answer.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) | CliError::Io { .. } | CliError::Output(_) => 3,
            CliError::Infeasible(_) => 4,
        }
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<PredictorError> for CliError {
    fn from(e: PredictorError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<LogError> for CliError {
    fn from(e: LogError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<SelectorError> for CliError {
    fn from(e: SelectorError) -> Self {
        match e {
            SelectorError::Unbounded | SelectorError::InfeasibleAtAnyScale(_) => {
                CliError::Infeasible(e.to_string())
            }
            SelectorError::ModelMissing => CliError::Data(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidProfile(inner) => inner.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Parses a byte count with an optional K/M/G/T suffix (powers of 1024).
/// A trailing `B` or `iB` is accepted, so `64M`, `64MB` and `64MiB` agree.
pub fn parse_bytes(text: &str) -> std::result::Result<Bytes, String> {
    let t = text.trim();
    let t = t
        .strip_suffix("iB")
        .or_else(|| t.strip_suffix('B'))
        .unwrap_or(t);
    let (digits, shift) = match t.chars().last().map(|c| c.to_ascii_uppercase()) {
        Some('K') => (&t[..t.len() - 1], 10),
        Some('M') => (&t[..t.len() - 1], 20),
        Some('G') => (&t[..t.len() - 1], 30),
        Some('T') => (&t[..t.len() - 1], 40),
        _ => (t, 0),
    };
    let value: Bytes = digits
        .trim()
        .parse()
        .map_err(|_| format!("invalid byte count `{text}`"))?;
    value
        .checked_mul(1 << shift)
        .ok_or_else(|| format!("byte count `{text}` overflows"))
}

fn parse_range(text: &str) -> std::result::Result<(u64, u64), String> {
    let (lo, hi) = text
        .split_once("..")
        .ok_or_else(|| format!("expected LO..HI, got `{text}`"))?;
    let hi = hi.strip_prefix('=').unwrap_or(hi);
    let lo: u64 = lo
        .parse()
        .map_err(|_| format!("invalid range start `{lo}`"))?;
    let hi: u64 = hi
        .parse()
        .map_err(|_| format!("invalid range end `{hi}`"))?;
    if lo == 0 || lo > hi {
        return Err(format!("range `{text}` must satisfy 1 <= LO <= HI"));
    }
    Ok((lo, hi))
}

#[derive(Debug, Parser)]
#[command(
    name = "blink",
    version,
    about = "Size clusters for iterative data-flow applications from sample runs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Fixture {
    Lr,
    Svm,
    Kmeans,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan the single-machine sample runs for an input.
    Plan {
        /// Total input size, e.g. 1T.
        #[arg(long, value_parser = parse_bytes)]
        bytes: Bytes,
        /// Input block size, e.g. 64M.
        #[arg(long, value_parser = parse_bytes)]
        block: Bytes,
        /// Sample fractions of the input.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SCALES)]
        scales: Vec<f64>,
    },
    /// Fit size models from a directory of sample-run logs.
    Fit {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Relative cross-validation error above which another run is suggested.
        #[arg(long, default_value_t = DEFAULT_ADAPTIVE_THRESHOLD)]
        threshold: f64,
    },
    /// Recommend a cluster size for the actual run.
    Recommend {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        /// Target data scale (full input = 1000).
        #[arg(long, default_value_t = FULL_SCALE)]
        scale: f64,
        /// Workload spec to simulate the actual run with.
        #[arg(long, conflicts_with = "actual_time")]
        spec: Option<PathBuf>,
        /// Measured wall time of the actual run, seconds.
        #[arg(long)]
        actual_time: Option<f64>,
    },
    /// Largest data scale a fixed cluster runs without evictions.
    Bounds {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        machines: u64,
        #[arg(long, default_value_t = DEFAULT_GRANULARITY)]
        granularity: f64,
    },
    /// Simulate one run of a workload.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        machines: u64,
        /// balanced, skewed:SEED or assigned:N1,N2,...
        #[arg(long, default_value = "balanced")]
        placement: Placement,
    },
    /// Simulate a range of cluster sizes and print the cost curve as CSV.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        /// Machine counts, LO..HI inclusive.
        #[arg(long, value_parser = parse_range)]
        range: (u64, u64),
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value = "balanced")]
        placement: Placement,
    },
    /// Write a synthetic or bundled workload spec, optionally with sample logs.
    Gen {
        #[arg(long, env = "BLINK_SEED", default_value_t = 0)]
        seed: u64,
        /// Write a bundled workload instead of a random one.
        #[arg(long, value_enum)]
        fixture: Option<Fixture>,
        #[arg(long, default_value_t = 6)]
        datasets: usize,
        #[arg(long, default_value_t = 2)]
        cached: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write the fixture's machine profile here.
        #[arg(long)]
        profile_out: Option<PathBuf>,
        /// Directory for sample-run logs, one per scale.
        #[arg(long)]
        logs: Option<PathBuf>,
        /// Sample scales in model units (full input = 1000).
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 3.0])]
        scales: Vec<f64>,
        /// Relative multiplicative noise on logged sizes.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Plan {
            bytes,
            block,
            scales,
        } => cmd_plan(bytes, block, &scales, out),
        Command::Fit {
            logs,
            out: model_out,
            threshold,
        } => cmd_fit(&logs, &model_out, threshold, out, err),
        Command::Recommend {
            model,
            profile,
            scale,
            spec,
            actual_time,
        } => {
            let model = read_model(&model)?;
            let profile = read_profile(&profile)?;
            let actual = match (spec, actual_time) {
                (Some(path), _) => ActualRun::Simulated(read_spec(&path)?),
                (None, Some(t)) => ActualRun::Measured(t),
                (None, None) => ActualRun::Unknown,
            };
            let report = cmd_recommend(&model, &profile, scale, &actual)?;
            write_json(out, &report)
        }
        Command::Bounds {
            model,
            profile,
            machines,
            granularity,
        } => {
            let model = read_model(&model)?;
            let profile = read_profile(&profile)?;
            write_json(out, &cmd_bounds(&model, &profile, machines, granularity)?)
        }
        Command::Simulate {
            spec,
            profile,
            machines,
            placement,
        } => {
            let spec = read_spec(&spec)?;
            let profile = read_profile(&profile)?;
            let report = simulator::run(&spec, machines, &profile, &placement)?;
            write_json(out, &json!(report))
        }
        Command::Sweep {
            spec,
            profile,
            range: (lo, hi),
            jobs,
            placement,
        } => {
            let spec = read_spec(&spec)?;
            let profile = read_profile(&profile)?;
            let machines: Vec<u64> = (lo..=hi).collect();
            let sweep = simulator::sweep_parallel(&spec, &machines, &profile, &placement, jobs)?;
            out.write_all(sweep.to_csv().as_bytes())?;
            Ok(())
        }
        Command::Gen {
            seed,
            fixture,
            datasets,
            cached,
            out: spec_out,
            profile_out,
            logs,
            scales,
            noise,
        } => {
            let (spec, profile) = match fixture {
                Some(Fixture::Lr) => (fixtures::logistic_regression(), None),
                Some(Fixture::Svm) => {
                    let (s, p) = fixtures::svm_like();
                    (s, Some(p))
                }
                Some(Fixture::Kmeans) => {
                    let (s, p) = fixtures::kmeans();
                    (s, Some(p))
                }
                None => {
                    let config = GenConfig {
                        seed,
                        n_datasets: datasets,
                        cached_count: cached,
                        noise_relative: noise,
                        ..Default::default()
                    };
                    (generate_spec(&config)?, None)
                }
            };
            write_file(&spec_out, &json!(spec))?;
            match (profile_out, profile) {
                (Some(path), Some(p)) => write_file(&path, &json!(p))?,
                (Some(_), None) => {
                    return Err(CliError::Usage(
                        "--profile-out needs a fixture with a profile".into(),
                    ))
                }
                _ => {}
            }
            if let Some(dir) = logs {
                write_sample_logs(&spec, &dir, &scales, noise, seed)?;
            }
            writeln!(err, "wrote {}", spec_out.display())?;
            Ok(())
        }
    }
}

pub fn cmd_plan(bytes: Bytes, block: Bytes, scales: &[f64], out: &mut dyn Write) -> Result<()> {
    let plan = plan_samples(bytes, block, scales)?;
    write_json(out, &json!(plan))
}

/// Reads every `*.jsonl` log in `dir`, in file-name order.
pub fn read_logs(dir: &Path, err: &mut dyn Write) -> Result<Vec<SampleRunLog>> {
    let io = |source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()
        .map_err(io)?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "jsonl"));
    paths.sort();
    let mut logs = Vec::with_capacity(paths.len());
    for path in paths {
        let file = fs::File::open(&path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        let parsed = parse_log(std::io::BufReader::new(file))
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if parsed.unknown_events > 0 {
            writeln!(
                err,
                "{}: skipped {} unknown events",
                path.display(),
                parsed.unknown_events
            )?;
        }
        logs.push(parsed.log);
    }
    Ok(logs)
}

pub fn cmd_fit(
    log_dir: &Path,
    model_out: &Path,
    threshold: f64,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    if !(threshold > 0.0) {
        return Err(CliError::Usage(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    let logs = read_logs(log_dir, err)?;
    if logs.len() < 3 {
        return Err(CliError::Data(format!(
            "need at least 3 sample-run logs, found {} in {}",
            logs.len(),
            log_dir.display()
        )));
    }
    let mut logs = logs;
    logs.sort_by(|a, b| a.data_scale.total_cmp(&b.data_scale));
    let fractions: Vec<f64> = logs.iter().map(|l| l.data_scale / FULL_SCALE).collect();
    for log in &logs {
        if let MonitorDecision::RerunLowerScale { scales } = monitor_sample_run(log, &fractions) {
            return Err(CliError::Data(format!(
                "sample run at scale {} evicted cached data; rerun at fractions {scales:?}",
                log.data_scale
            )));
        }
    }
    let features: Vec<_> = logs.iter().map(extract_features).collect();
    let mut model = fit_runs(&features)?;
    model.sample_cost = sample_runs_cost(&logs);
    write_file(model_out, &model.to_json())?;

    if model.single_machine {
        writeln!(
            err,
            "no cached datasets in the sample runs: run on a single machine"
        )?;
    }
    let max_error = model.max_relative_error();
    if let Some(e) = max_error.filter(|&e| e > threshold) {
        writeln!(err, "{}", adaptive_hint(&logs[0], &fractions, e, threshold))?;
    }
    let cv: serde_json::Map<String, serde_json::Value> = model
        .datasets
        .iter()
        .map(|(id, m)| {
            (
                id.clone(),
                json!({"loo_rmse": m.loo_rmse, "loo_relative_error": m.loo_relative_error}),
            )
        })
        .collect();
    write_json(
        out,
        &json!({
            "model": model_out.display().to_string(),
            "single_machine": model.single_machine,
            "cross_validation": cv,
            "max_relative_error": max_error,
            "sample_cost_machine_s": model.sample_cost,
        }),
    )
}

fn adaptive_hint(first: &SampleRunLog, fractions: &[f64], error: f64, threshold: f64) -> String {
    let base = format!("relative cross-validation error {error:.3} exceeds {threshold}");
    let total = (first.input_bytes as f64 / fractions[0]).round() as Bytes;
    let block = first.input_bytes.div_ceil(first.block_count.max(1) as u64);
    let extended = plan_samples(total, block.max(1), fractions)
        .and_then(|plan| adaptive_extend(&plan, error, threshold, fractions.len() + 1));
    match extended {
        Ok(ext) if ext.added > 0 => format!(
            "{base}; add a sample run at fraction {}",
            ext.plan.scales[ext.plan.scales.len() - 1]
        ),
        _ => format!("{base}; add sample runs at larger scales"),
    }
}

/// How the cost of the actual run is obtained for the cost account.
#[derive(Debug, Clone)]
pub enum ActualRun {
    /// Simulate this workload at the recommended size.
    Simulated(WorkloadSpec),
    /// Measured wall time in seconds on the recommended cluster.
    Measured(f64),
    Unknown,
}

pub fn cmd_recommend(
    model: &ModelFile,
    profile: &MachineProfile,
    scale: f64,
    actual: &ActualRun,
) -> Result<serde_json::Value> {
    let recommendation = select_cluster_size(
        &model.datasets,
        model.execution_memory.as_ref(),
        scale,
        profile,
    )?;
    let n = recommendation.machines;
    let (actual_cost, simulated, skew) = match actual {
        ActualRun::Simulated(spec) => {
            let spec = spec.at_scale(scale);
            let report = simulator::run(&spec, n, profile, &Placement::Balanced)?;
            let skew = match profile.task_capacity {
                Some(_) => Some(skew_adjusted_check(
                    &recommendation,
                    spec.cached_partitions(),
                    profile,
                    None,
                )?),
                None => None,
            };
            (Some(report.total_cost), Some(report), skew)
        }
        ActualRun::Measured(t) if *t >= 0.0 && t.is_finite() => (Some(n as f64 * t), None, None),
        ActualRun::Measured(t) => return Err(CliError::Usage(format!("invalid actual time {t}"))),
        ActualRun::Unknown => (None, None, None),
    };
    let account = actual_cost.map(|c| CostAccount::new(model.sample_cost, c));
    Ok(json!({
        "recommendation": recommendation,
        "single_machine": model.single_machine,
        "cost_account": account,
        "sampling_overhead": account.and_then(|a| a.sampling_overhead()),
        "simulated_run": simulated,
        "skew_check": skew,
    }))
}

pub fn cmd_bounds(
    model: &ModelFile,
    profile: &MachineProfile,
    machines: u64,
    granularity: f64,
) -> Result<serde_json::Value> {
    let demand = DemandModel::from_models(&model.datasets, model.execution_memory.as_ref())?;
    let max_scale = cluster_bounds(&demand, machines, profile, granularity)?;
    Ok(json!({
        "machines": machines,
        "granularity": granularity,
        "max_scale": max_scale,
    }))
}

fn write_sample_logs(
    spec: &WorkloadSpec,
    dir: &Path,
    scales: &[f64],
    noise: f64,
    seed: u64,
) -> Result<()> {
    if !(0.0..=0.5).contains(&noise) {
        return Err(CliError::Usage(format!(
            "noise must lie in [0, 0.5], got {noise}"
        )));
    }
    if scales.iter().any(|s| !(*s > 0.0)) {
        return Err(CliError::Usage("sample scales must be positive".into()));
    }
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for (i, &scale) in scales.iter().enumerate() {
        let log = emit_sample_log(spec, scale, noise, seed.wrapping_add(i as u64));
        let path = dir.join(format!("sample-{i}.jsonl"));
        fs::write(&path, log.to_event_lines()).map_err(|source| CliError::Io { path, source })?;
    }
    Ok(())
}

fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    ModelFile::from_json(&read_json(path)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn read_profile(path: &Path) -> Result<MachineProfile> {
    let profile: MachineProfile = serde_json::from_value(read_json(path)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    profile.validate()?;
    Ok(profile)
}

pub fn read_spec(path: &Path) -> Result<WorkloadSpec> {
    serde_json::from_value(read_json(path)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_json(out: &mut dyn Write, value: &serde_json::Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| CliError::Output(e.into()))?;
    writeln!(out)?;
    Ok(())
}

fn write_file(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn human_units_are_binary() {
        assert_eq!(parse_bytes("1T"), Ok(1 << 40));
        assert_eq!(parse_bytes("64M"), Ok(64 << 20));
        assert_eq!(parse_bytes("64MB"), Ok(64 << 20));
        assert_eq!(parse_bytes("64MiB"), Ok(64 << 20));
        assert_eq!(parse_bytes("314k"), Ok(314 << 10));
        assert_eq!(parse_bytes("12345"), Ok(12345));
        assert_eq!(parse_bytes("7B"), Ok(7));
        assert!(parse_bytes("x1G").is_err());
        assert!(parse_bytes("").is_err());
        assert!(parse_bytes("99999999T").is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("1..12"), Ok((1, 12)));
        assert_eq!(parse_range("3..=3"), Ok((3, 3)));
        assert!(parse_range("0..4").is_err());
        assert!(parse_range("5..4").is_err());
        assert!(parse_range("5").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::from(SelectorError::Unbounded).exit_code(), 4);
        assert_eq!(
            CliError::from(SelectorError::InfeasibleAtAnyScale(2)).exit_code(),
            4
        );
        assert_eq!(CliError::from(SelectorError::ModelMissing).exit_code(), 3);
        assert_eq!(CliError::from(PredictorError::ZeroActual).exit_code(), 3);
        assert_eq!(CliError::from(SamplerError::EmptyInput).exit_code(), 2);
    }
}

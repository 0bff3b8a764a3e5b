//! Experiment orchestration: build the task and model from a config, run
//! the training loop, and write the run artifacts (metrics.csv,
//! diagnostics.csv, params_audit.json, checkpoint.bin, config.json).

use crate::config::{ExperimentKind, ModelKind, RunConfig};
use cernn_core::cells::{CellFlavor, RecurrentCellConfig};
use cernn_core::linops::CascadeFlavor;
use cernn_core::models::Model;
use cernn_core::rng::Rng;
use cernn_core::tasks::{CopyTaskSpec, RegressionTaskSpec, Task, ALPHABET};
use cernn_core::training::{
    model_from_checkpoint, read_checkpoint, train, write_checkpoint, AdamConfig, TrainLoopConfig,
    TrainOutcome, INIT_STREAM,
};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum CliError {
    /// Bad config file, bad flags, unreadable or unwritable paths.
    Config(String),
    /// The run produced a non-finite loss or gradient.
    Diverged { step: u64 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Diverged { .. } => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Diverged { step } => write!(f, "run diverged at step {step}"),
        }
    }
}

impl std::error::Error for CliError {}

fn cfg_err<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Config(format!("{context}: {e}"))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub model: String,
    pub seed: u64,
    pub steps: u64,
    pub diverged: bool,
    pub final_window_loss: f64,
    pub record_count: usize,
}

/// File names written into every run directory.
pub const CONFIG_FILE: &str = "config.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const AUDIT_FILE: &str = "params_audit.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

pub fn run_experiment_from_file(
    path: &Path,
    seed_override: Option<u64>,
    max_steps_override: Option<u64>,
    out_override: Option<String>,
) -> Result<RunSummary, CliError> {
    let raw = std::fs::read_to_string(path).map_err(cfg_err("reading config"))?;
    let mut config: RunConfig =
        serde_json::from_str(&raw).map_err(cfg_err("parsing config"))?;
    if let Some(seed) = seed_override {
        config.seed = seed;
    }
    if let Some(steps) = max_steps_override {
        config.max_steps = Some(steps);
    }
    if let Some(out) = out_override {
        config.output_dir = out;
    }
    run_experiment(&config)
}

/// Run one experiment and persist all artifacts. The persisted config has
/// every default resolved, so re-running it reproduces metrics.csv
/// byte-for-byte.
pub fn run_experiment(config: &RunConfig) -> Result<RunSummary, CliError> {
    let (resolved, experiment, model_kind) = config.validate().map_err(CliError::Config)?;
    let out_dir = PathBuf::from(&resolved.output_dir);
    std::fs::create_dir_all(&out_dir).map_err(cfg_err("creating output dir"))?;

    let config_json =
        serde_json::to_string_pretty(&resolved).map_err(cfg_err("serializing config"))?;
    std::fs::write(out_dir.join(CONFIG_FILE), config_json.as_bytes())
        .map_err(cfg_err("writing config copy"))?;

    let task = build_task(&resolved, experiment).map_err(CliError::Config)?;
    let mut model = build_model(&resolved, experiment, model_kind).map_err(CliError::Config)?;

    let adam = AdamConfig::with_alpha(resolved.learning_rate);
    let loop_cfg = TrainLoopConfig {
        max_steps: resolved.max_steps.unwrap(),
        batch_size: resolved.batch_size.unwrap(),
        metrics_interval: resolved.metrics_interval,
        seed: resolved.seed,
    };
    let outcome = train(&task, &mut model, &adam, &loop_cfg)
        .map_err(|e| CliError::Config(format!("training failed: {e}")))?;

    write_metrics(&out_dir, &outcome).map_err(cfg_err("writing metrics"))?;
    if model.angle_norm_u1().is_some() {
        write_diagnostics(&out_dir, &outcome).map_err(cfg_err("writing diagnostics"))?;
    }
    write_audit(&out_dir, &model).map_err(cfg_err("writing audit"))?;
    write_checkpoint(
        &out_dir.join(CHECKPOINT_FILE),
        &model,
        resolved.seed,
        outcome.final_step,
    )
    .map_err(cfg_err("writing checkpoint"))?;

    let summary = RunSummary {
        out_dir,
        model: model_kind.as_str().to_string(),
        seed: resolved.seed,
        steps: outcome.final_step,
        diverged: outcome.diverged,
        final_window_loss: outcome.final_window_loss(),
        record_count: outcome.records.len(),
    };
    if outcome.diverged {
        return Err(CliError::Diverged {
            step: outcome.final_step,
        });
    }
    Ok(summary)
}

fn build_task(cfg: &RunConfig, experiment: ExperimentKind) -> Result<Task, String> {
    match experiment {
        ExperimentKind::Regression => RegressionTaskSpec::new(cfg.n, cfg.noise_std, cfg.seed)
            .map(Task::Regression)
            .map_err(|e| e.to_string()),
        ExperimentKind::Copy => Ok(Task::Copy(CopyTaskSpec::new(
            cfg.t_len, cfg.n_fill, cfg.seed,
        ))),
    }
}

fn build_model(
    cfg: &RunConfig,
    experiment: ExperimentKind,
    model_kind: ModelKind,
) -> Result<Model, String> {
    let mut init_rng = Rng::stream(cfg.seed, INIT_STREAM);
    match experiment {
        ExperimentKind::Regression => match model_kind {
            ModelKind::Dense => Ok(Model::new_dense(cfg.n)),
            ModelKind::Urnn => Ok(Model::new_cascade_reg(
                cfg.n,
                CascadeFlavor::Unitary,
                &mut init_rng,
            )),
            ModelKind::Cernn => Ok(Model::new_cascade_reg(
                cfg.n,
                CascadeFlavor::ComplexEvolution,
                &mut init_rng,
            )),
            ModelKind::Lstm => unreachable!("rejected by validation"),
        },
        ExperimentKind::Copy => {
            let flavor = match model_kind {
                ModelKind::Urnn => CellFlavor::Urnn,
                ModelKind::Cernn => CellFlavor::Cernn,
                ModelKind::Lstm => CellFlavor::Lstm,
                ModelKind::Dense => unreachable!("rejected by validation"),
            };
            Model::new_cell(
                RecurrentCellConfig {
                    hidden: cfg.n,
                    input: ALPHABET,
                    flavor,
                    output_dim: ALPHABET,
                    truncate_to: cfg.truncate_to,
                },
                &mut init_rng,
            )
            .map_err(|e| e.to_string())
        }
    }
}

/// metrics.csv: fixed header, one row per record. Wall-clock time is
/// deliberately not serialized (equal seeds must give identical bytes).
fn write_metrics(out_dir: &Path, outcome: &TrainOutcome) -> std::io::Result<()> {
    let mut csv = String::from("step,loss,grad_norm\n");
    for r in &outcome.records {
        let _ = writeln!(csv, "{},{},{}", r.step, r.loss, r.grad_norm);
    }
    std::fs::write(out_dir.join(METRICS_FILE), csv.as_bytes())
}

/// diagnostics.csv: the quantities behind the angle-norm and loss plots.
fn write_diagnostics(out_dir: &Path, outcome: &TrainOutcome) -> std::io::Result<()> {
    let mut csv = String::from("step,loss,angle_norm_u1\n");
    for r in &outcome.records {
        let angle = r
            .diagnostics
            .iter()
            .find(|(k, _)| k == "angle_norm_u1")
            .map(|(_, v)| *v)
            .unwrap_or(f64::NAN);
        let _ = writeln!(csv, "{},{},{}", r.step, r.loss, angle);
    }
    std::fs::write(out_dir.join(DIAGNOSTICS_FILE), csv.as_bytes())
}

#[derive(Debug, Serialize)]
struct AuditSegment {
    name: String,
    owner: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

#[derive(Debug, Serialize)]
struct ParamsAudit {
    total: usize,
    /// Trainable reals inside the structured cascade, when the model has one.
    structured_reals: Option<usize>,
    by_owner: std::collections::BTreeMap<String, usize>,
    segments: Vec<AuditSegment>,
}

fn write_audit(out_dir: &Path, model: &Model) -> std::io::Result<()> {
    let segments: Vec<AuditSegment> = model
        .segments()
        .into_iter()
        .map(|s| AuditSegment {
            name: s.name,
            owner: s.owner,
            shape: s.shape,
            offset: s.offset,
            len: s.len,
        })
        .collect();
    let mut by_owner = std::collections::BTreeMap::new();
    for s in &segments {
        *by_owner.entry(s.owner.clone()).or_insert(0) += s.len;
    }
    let audit = ParamsAudit {
        total: model.param_count(),
        structured_reals: model.structured_param_count(),
        by_owner,
        segments,
    };
    let json = serde_json::to_string_pretty(&audit)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    std::fs::write(out_dir.join(AUDIT_FILE), json.as_bytes())
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub dir: String,
    pub model: String,
    pub seed: u64,
    pub final_window_loss: f64,
    pub max_step: u64,
    /// First recorded step with loss below the threshold, if one was given.
    pub step_to_threshold: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub experiment: String,
    pub rows: Vec<CompareRow>,
    /// Models ordered by ascending final-window loss, e.g.
    /// "dense < cernn < urnn". Only emitted for two or more runs.
    pub verdict: Option<String>,
}

impl CompareReport {
    pub fn text_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<28} {:>6} {:>6} {:>14} {:>10} {:>12}",
            "run", "model", "seed", "final_loss", "max_step", "to_threshold"
        );
        for r in &self.rows {
            let thr = r
                .step_to_threshold
                .map(|s| s.to_string())
                .unwrap_or_else(|| "-".to_string());
            let _ = writeln!(
                out,
                "{:<28} {:>6} {:>6} {:>14.6e} {:>10} {:>12}",
                r.dir, r.model, r.seed, r.final_window_loss, r.max_step, thr
            );
        }
        if let Some(v) = &self.verdict {
            let _ = writeln!(out, "ordering: {v}");
        }
        out
    }
}

/// Parsed metrics.csv.
pub fn read_metrics(path: &Path) -> Result<Vec<(u64, f64, f64)>, CliError> {
    let raw = std::fs::read_to_string(path).map_err(cfg_err("reading metrics.csv"))?;
    let mut lines = raw.lines();
    match lines.next() {
        Some("step,loss,grad_norm") => {}
        _ => {
            return Err(CliError::Config(format!(
                "malformed metrics file {}: bad header",
                path.display()
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let parse_err = || {
            CliError::Config(format!(
                "malformed metrics file {} at data row {}",
                path.display(),
                i + 1
            ))
        };
        let step: u64 = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(parse_err)?;
        let loss: f64 = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(parse_err)?;
        let grad_norm: f64 = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(parse_err)?;
        if fields.next().is_some() {
            return Err(parse_err());
        }
        rows.push((step, loss, grad_norm));
    }
    if rows.is_empty() {
        return Err(CliError::Config(format!(
            "metrics file {} has no data rows",
            path.display()
        )));
    }
    Ok(rows)
}

/// Final-window (last 5% of steps) average loss of a metrics stream.
pub fn final_window_loss(rows: &[(u64, f64, f64)]) -> f64 {
    let max_step = rows.last().map(|r| r.0).unwrap_or(0);
    let cutoff = (max_step as f64 * 0.95) as u64;
    let tail: Vec<f64> = rows
        .iter()
        .filter(|r| r.0 >= cutoff)
        .map(|r| r.1)
        .collect();
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Summarize finished runs side by side. All runs must belong to the same
/// experiment; comparing across tasks is refused.
pub fn compare_runs(dirs: &[PathBuf], threshold: Option<f64>) -> Result<CompareReport, CliError> {
    if dirs.is_empty() {
        return Err(CliError::Config("no run directories given".into()));
    }
    let mut experiment: Option<String> = None;
    let mut rows = Vec::new();
    for dir in dirs {
        let raw = std::fs::read_to_string(dir.join(CONFIG_FILE))
            .map_err(cfg_err(&format!("reading {}/config.json", dir.display())))?;
        let config: RunConfig = serde_json::from_str(&raw)
            .map_err(cfg_err(&format!("parsing {}/config.json", dir.display())))?;
        match &experiment {
            None => experiment = Some(config.experiment.clone()),
            Some(e) if *e == config.experiment => {}
            Some(e) => {
                return Err(CliError::Config(format!(
                    "refusing cross-task comparison: {} is '{}' but earlier runs are '{e}'",
                    dir.display(),
                    config.experiment
                )))
            }
        }
        let metrics = read_metrics(&dir.join(METRICS_FILE))?;
        let step_to_threshold = threshold.and_then(|thr| {
            metrics
                .iter()
                .find(|(_, loss, _)| *loss < thr)
                .map(|(step, _, _)| *step)
        });
        rows.push(CompareRow {
            dir: dir.display().to_string(),
            model: config.model.clone(),
            seed: config.seed,
            final_window_loss: final_window_loss(&metrics),
            max_step: metrics.last().unwrap().0,
            step_to_threshold,
        });
    }
    let verdict = if rows.len() > 1 {
        let mut sorted = rows.clone();
        sorted.sort_by(|a, b| a.final_window_loss.total_cmp(&b.final_window_loss));
        Some(
            sorted
                .iter()
                .map(|r| r.model.as_str())
                .collect::<Vec<_>>()
                .join(" < "),
        )
    } else {
        None
    };
    Ok(CompareReport {
        experiment: experiment.unwrap(),
        rows,
        verdict,
    })
}

/// CSV of the realized complex diagonal entries of a checkpointed model:
/// one row per entry per diagonal stage.
pub fn dump_diag_scatter(checkpoint: &Path) -> Result<String, CliError> {
    let (header, data) = read_checkpoint(checkpoint).map_err(cfg_err("reading checkpoint"))?;
    let model = model_from_checkpoint(&header, &data)
        .map_err(|e| CliError::Config(format!("rebuilding checkpointed model: {e}")))?;
    let diagonals = model.diagonal_entries().ok_or_else(|| {
        CliError::Config("checkpoint has no structured diagonals to dump".into())
    })?;
    let mut csv = String::from("diagonal,index,re,im\n");
    for (d, (re, im)) in diagonals.iter().enumerate() {
        for i in 0..re.len() {
            let _ = writeln!(csv, "{},{},{},{}", d + 1, i, re[i], im[i]);
        }
    }
    Ok(csv)
}

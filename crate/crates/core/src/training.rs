//! Parameter flattening, Adam, the gradient-check harness, the training
//! loop and checkpoint files.

use crate::error::{Error, Result};
use crate::models::{Model, ModelSpec};
use crate::rng::Rng;
use crate::tasks::Task;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

/// Stream id used for drawing training batches (init uses stream 1).
pub const INIT_STREAM: u64 = 1;
pub const DATA_STREAM: u64 = 2;

/// One named slice of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub owner: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

/// Flat parameter vector plus its segment map.
#[derive(Debug, Clone)]
pub struct ParamBlock {
    pub segments: Vec<Segment>,
    pub data: Vec<f64>,
}

impl ParamBlock {
    pub fn from_model(model: &Model) -> ParamBlock {
        ParamBlock {
            segments: model.segments(),
            data: model.params_vec(),
        }
    }

    pub fn total_len(&self) -> usize {
        self.segments.iter().map(|s| s.len).sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_alpha(alpha: f64) -> AdamConfig {
        AdamConfig {
            alpha,
            ..AdamConfig::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> AdamState {
        AdamState {
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// Standard Adam update with bias correction, in place.
pub fn adam_step(
    state: &mut AdamState,
    cfg: &AdamConfig,
    params: &mut [f64],
    grads: &[f64],
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::DimMismatch {
            context: "adam_step",
            expected: state.m.len(),
            actual: params.len().min(grads.len()),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= cfg.alpha * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct GradCheckIssue {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    /// Coordinates exceeding the tolerance, worst first (up to 16).
    pub failures: Vec<GradCheckIssue>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Central finite differences against an analytic gradient.
///
/// rel_err = |a - n| / max(|a|, |n|, abs_floor); coordinates above
/// `rel_tol` are reported as failures.
pub fn grad_check(
    loss: &mut dyn FnMut(&[f64]) -> f64,
    params: &[f64],
    analytic: &[f64],
    h: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> GradCheckReport {
    assert_eq!(params.len(), analytic.len());
    let mut probe = params.to_vec();
    let mut failures: Vec<GradCheckIssue> = Vec::new();
    let mut max_rel = 0.0f64;
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = loss(&probe);
        probe[i] = orig - h;
        let down = loss(&probe);
        probe[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(abs_floor);
        max_rel = max_rel.max(rel);
        if rel > rel_tol {
            failures.push(GradCheckIssue {
                index: i,
                analytic: analytic[i],
                numeric,
                rel_err: rel,
            });
        }
    }
    failures.sort_by(|a, b| b.rel_err.total_cmp(&a.rel_err));
    failures.truncate(16);
    GradCheckReport {
        checked: params.len(),
        max_rel_err: max_rel,
        failures,
    }
}

#[derive(Debug, Clone)]
pub struct TrainRecord {
    pub step: u64,
    pub loss: f64,
    pub grad_norm: f64,
    /// Wall-clock time of this step; kept in memory only (it would break
    /// byte-identical metrics files).
    pub wall_ms: f64,
    pub diagnostics: Vec<(String, f64)>,
}

#[derive(Debug, Clone)]
pub struct TrainLoopConfig {
    pub max_steps: u64,
    pub batch_size: usize,
    pub metrics_interval: u64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub records: Vec<TrainRecord>,
    pub diverged: bool,
    pub final_step: u64,
    /// Parameters at termination, with their segment map.
    pub final_params: ParamBlock,
}

impl TrainOutcome {
    /// Mean loss over the final 5% of steps (convergence figure).
    pub fn final_window_loss(&self) -> f64 {
        let max_step = self.records.last().map(|r| r.step).unwrap_or(0);
        let cutoff = (max_step as f64 * 0.95) as u64;
        let tail: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.step >= cutoff)
            .map(|r| r.loss)
            .collect();
        if tail.is_empty() {
            return f64::NAN;
        }
        tail.iter().sum::<f64>() / tail.len() as f64
    }
}

/// Deterministic training loop.
///
/// A metrics record is emitted at every step that is a multiple of
/// `metrics_interval`, including step 0 (the initial loss) and, when the
/// interval divides it, `max_steps` itself — so a finished run always has
/// floor(max_steps / metrics_interval) + 1 records. The update at step s
/// uses the same batch whose loss the step-s record reports. A non-finite
/// loss or gradient flags the run diverged, records the event and stops.
pub fn train(
    task: &Task,
    model: &mut Model,
    adam_cfg: &AdamConfig,
    cfg: &TrainLoopConfig,
) -> Result<TrainOutcome> {
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    if cfg.metrics_interval == 0 {
        return Err(Error::Config("metrics_interval must be positive".into()));
    }
    let mut data_rng = Rng::stream(cfg.seed, DATA_STREAM);
    let mut params = model.params_vec();
    let mut adam = AdamState::new(params.len());
    let mut records = Vec::new();
    let started = Instant::now();
    let mut last_wall = 0.0f64;
    for step in 0..=cfg.max_steps {
        let batch = task.draw(cfg.batch_size, &mut data_rng);
        let (loss, grads) = model.loss_and_grad(&batch)?;
        let grad_norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
        let finite = loss.is_finite() && grad_norm.is_finite();
        if step % cfg.metrics_interval == 0 || !finite {
            let now = started.elapsed().as_secs_f64() * 1e3;
            let wall_ms = now - last_wall;
            last_wall = now;
            let mut diagnostics = Vec::new();
            if let Some(a) = model.angle_norm_u1() {
                diagnostics.push(("angle_norm_u1".to_string(), a));
            }
            records.push(TrainRecord {
                step,
                loss,
                grad_norm,
                wall_ms,
                diagnostics,
            });
        }
        if !finite {
            return Ok(TrainOutcome {
                records,
                diverged: true,
                final_step: step,
                final_params: ParamBlock::from_model(model),
            });
        }
        if step < cfg.max_steps {
            adam_step(&mut adam, adam_cfg, &mut params, &grads)?;
            model.set_params(&params);
            // Reflector repair may have clamped something; stay in sync.
            model.get_params(&mut params);
        }
    }
    Ok(TrainOutcome {
        records,
        diverged: false,
        final_step: cfg.max_steps,
        final_params: ParamBlock::from_model(model),
    })
}

/// Checkpoint file: one JSON header line, then the raw parameter data as
/// little-endian f64. Version 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub model: ModelSpec,
    pub perm: Option<Vec<usize>>,
    pub seed: u64,
    pub step: u64,
    pub segments: Vec<Segment>,
    pub data_len: usize,
}

pub fn write_checkpoint(
    path: &Path,
    model: &Model,
    seed: u64,
    step: u64,
) -> std::io::Result<()> {
    let block = ParamBlock::from_model(model);
    let header = CheckpointHeader {
        version: 1,
        model: model.spec(),
        perm: model.permutation(),
        seed,
        step,
        segments: block.segments,
        data_len: block.data.len(),
    };
    let mut file = std::fs::File::create(path)?;
    let json = serde_json::to_string(&header)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    file.write_all(json.as_bytes())?;
    file.write_all(b"\n")?;
    let mut bytes = Vec::with_capacity(block.data.len() * 8);
    for v in &block.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    file.write_all(&bytes)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> std::io::Result<(CheckpointHeader, Vec<f64>)> {
    let mut raw = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut raw)?;
    let newline = raw
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| corrupt("missing header line"))?;
    let header: CheckpointHeader =
        serde_json::from_slice(&raw[..newline]).map_err(|e| corrupt(&e.to_string()))?;
    if header.version != 1 {
        return Err(corrupt(&format!(
            "unsupported checkpoint version {}",
            header.version
        )));
    }
    let body = &raw[newline + 1..];
    if body.len() != header.data_len * 8 {
        return Err(corrupt(&format!(
            "expected {} data bytes, found {}",
            header.data_len * 8,
            body.len()
        )));
    }
    let mut data = Vec::with_capacity(header.data_len);
    for chunk in body.chunks_exact(8) {
        data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    Ok((header, data))
}

fn corrupt(msg: &str) -> std::io::Error {
    std::io::Error::new(
        std::io::ErrorKind::InvalidData,
        format!("corrupt checkpoint: {msg}"),
    )
}

/// Rebuild the checkpointed model with its parameters and permutation.
pub fn model_from_checkpoint(header: &CheckpointHeader, data: &[f64]) -> Result<Model> {
    let mut model = Model::from_spec(&header.model)?;
    if model.param_count() != data.len() {
        return Err(Error::DimMismatch {
            context: "checkpoint data",
            expected: model.param_count(),
            actual: data.len(),
        });
    }
    if let Some(perm) = &header.perm {
        model.set_permutation(perm.clone())?;
    }
    model.set_params(data);
    Ok(model)
}

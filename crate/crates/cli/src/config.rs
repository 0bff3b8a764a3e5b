//! Run configuration: one flat JSON document, persisted verbatim into the
//! output directory so every run is reproducible from its own artifacts.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// "regression" | "copy"
    pub experiment: String,
    /// "dense" | "urnn" | "cernn" | "lstm"
    pub model: String,
    /// Dimension of the regression process / hidden size of the cells.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_t_len")]
    pub t_len: usize,
    #[serde(default = "default_n_fill")]
    pub n_fill: usize,
    #[serde(default = "default_noise_std")]
    pub noise_std: f64,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// Defaults per task: 32 (regression), 128 (copy).
    #[serde(default)]
    pub batch_size: Option<usize>,
    /// Defaults per task: 20_000 (regression), 50_000 (copy).
    #[serde(default)]
    pub max_steps: Option<u64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub truncate_to: Option<usize>,
    #[serde(default = "default_metrics_interval")]
    pub metrics_interval: u64,
    pub output_dir: String,
}

fn default_n() -> usize {
    32
}
fn default_t_len() -> usize {
    10
}
fn default_n_fill() -> usize {
    100
}
fn default_noise_std() -> f64 {
    0.1
}
fn default_learning_rate() -> f64 {
    1e-3
}
fn default_seed() -> u64 {
    1
}
fn default_metrics_interval() -> u64 {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Regression,
    Copy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Dense,
    Urnn,
    Cernn,
    Lstm,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Dense => "dense",
            ModelKind::Urnn => "urnn",
            ModelKind::Cernn => "cernn",
            ModelKind::Lstm => "lstm",
        }
    }
}

impl RunConfig {
    /// Check the field combination and fill in per-task defaults.
    /// The returned config has `batch_size` and `max_steps` resolved, so
    /// persisting it captures the run completely.
    pub fn validate(&self) -> Result<(RunConfig, ExperimentKind, ModelKind), String> {
        let experiment = match self.experiment.as_str() {
            "regression" => ExperimentKind::Regression,
            "copy" => ExperimentKind::Copy,
            other => return Err(format!("unknown experiment '{other}'")),
        };
        let model = match self.model.as_str() {
            "dense" => ModelKind::Dense,
            "urnn" => ModelKind::Urnn,
            "cernn" => ModelKind::Cernn,
            "lstm" => ModelKind::Lstm,
            other => return Err(format!("unknown model '{other}'")),
        };
        match (experiment, model) {
            (ExperimentKind::Regression, ModelKind::Lstm) => {
                return Err("lstm cannot run the single-application regression task".into());
            }
            (ExperimentKind::Copy, ModelKind::Dense) => {
                return Err("the dense matrix model has no recurrence for the copy task".into());
            }
            _ => {}
        }
        if self.n == 0 {
            return Err("n must be positive".into());
        }
        if self.noise_std.is_nan() || self.noise_std < 0.0 {
            return Err("noise_std must be >= 0".into());
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err("learning_rate must be > 0".into());
        }
        if self.metrics_interval == 0 {
            return Err("metrics_interval must be positive".into());
        }
        if let Some(k) = self.truncate_to {
            if k == 0 || k > self.n {
                return Err(format!("truncate_to {k} must be in 1..=n ({})", self.n));
            }
            if experiment == ExperimentKind::Regression {
                return Err("truncate_to applies to the copy task models only".into());
            }
        }
        if let Some(b) = self.batch_size {
            if b == 0 {
                return Err("batch_size must be positive".into());
            }
        }
        let mut resolved = self.clone();
        resolved.batch_size = Some(self.batch_size.unwrap_or(match experiment {
            ExperimentKind::Regression => 32,
            ExperimentKind::Copy => 128,
        }));
        resolved.max_steps = Some(self.max_steps.unwrap_or(match experiment {
            ExperimentKind::Regression => 20_000,
            ExperimentKind::Copy => 50_000,
        }));
        Ok((resolved, experiment, model))
    }
}

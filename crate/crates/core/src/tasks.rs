//! Deterministic generators and analytic baselines for the two benchmark
//! tasks: multivariate linear regression and the copy memory task.

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Stream id for drawing the fixed regression matrix.
const TASK_MATRIX_STREAM: u64 = 3;

/// y = W_m x + n with x ~ N(0, I) and n ~ N(0, noise_std^2 I).
/// W_m is drawn once per task instance and then frozen.
#[derive(Debug, Clone)]
pub struct RegressionTaskSpec {
    pub n: usize,
    pub noise_std: f64,
    pub seed: u64,
    w_m: Vec<f64>, // n x n row-major
}

impl RegressionTaskSpec {
    /// Entries of W_m are i.i.d. N(0, 1/n) so ||W_m x|| stays O(||x||)
    /// regardless of dimension.
    pub fn new(n: usize, noise_std: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("regression dimension must be positive".into()));
        }
        if noise_std.is_nan() || noise_std < 0.0 {
            return Err(Error::Config("noise_std must be >= 0".into()));
        }
        let mut rng = Rng::stream(seed, TASK_MATRIX_STREAM);
        let scale = 1.0 / (n as f64).sqrt();
        let w_m = (0..n * n).map(|_| scale * rng.normal()).collect();
        Ok(RegressionTaskSpec {
            n,
            noise_std,
            seed,
            w_m,
        })
    }

    pub fn w_m(&self) -> &[f64] {
        &self.w_m
    }

    pub fn apply_w_m(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let row = i * self.n;
            let mut acc = 0.0;
            for j in 0..self.n {
                acc += self.w_m[row + j] * x[j];
            }
            out[i] = acc;
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegressionBatch {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<Vec<f64>>,
}

/// Fresh samples each call (online regime).
pub fn gen_regression_batch(
    spec: &RegressionTaskSpec,
    batch_size: usize,
    rng: &mut Rng,
) -> RegressionBatch {
    let n = spec.n;
    let mut xs = Vec::with_capacity(batch_size);
    let mut ys = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let x: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let mut y = vec![0.0; n];
        spec.apply_w_m(&x, &mut y);
        for yi in y.iter_mut() {
            *yi += spec.noise_std * rng.normal();
        }
        xs.push(x);
        ys.push(y);
    }
    RegressionBatch { xs, ys }
}

/// Irreducible MSE of the exact model under the mean-over-coordinates
/// reduction used by the MSE loss head: the noise variance.
pub fn regression_mse_floor(spec: &RegressionTaskSpec) -> f64 {
    spec.noise_std * spec.noise_std
}

/// Copy memory task alphabet: 7 data symbols, one filler, one trigger.
pub const ALPHABET: usize = 9;
pub const DATA_SYMBOLS: usize = 7;
pub const FILLER: usize = 7;
pub const TRIGGER: usize = 8;

/// Input layout: [target block | filler block | trigger | filler block],
/// target layout: [filler everywhere | replay of the target block].
#[derive(Debug, Clone)]
pub struct CopyTaskSpec {
    pub t_len: usize,
    pub n_fill: usize,
    pub seed: u64,
}

impl CopyTaskSpec {
    pub fn new(t_len: usize, n_fill: usize, seed: u64) -> CopyTaskSpec {
        CopyTaskSpec {
            t_len,
            n_fill,
            seed,
        }
    }

    pub fn total_len(&self) -> usize {
        2 * self.t_len + self.n_fill + 1
    }

    /// Position of the trigger symbol (0-based).
    pub fn trigger_pos(&self) -> usize {
        self.t_len + self.n_fill
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CopySample {
    pub inputs: Vec<usize>,
    pub targets: Vec<usize>,
}

impl CopySample {
    pub fn one_hot_inputs(&self) -> Vec<Vec<f64>> {
        self.inputs
            .iter()
            .map(|&s| {
                let mut v = vec![0.0; ALPHABET];
                v[s] = 1.0;
                v
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct CopyBatch {
    pub samples: Vec<CopySample>,
}

/// Target symbols are sampled with repetition, uniformly over the 7 data
/// symbols.
pub fn gen_copy_batch(spec: &CopyTaskSpec, batch_size: usize, rng: &mut Rng) -> CopyBatch {
    let total = spec.total_len();
    let mut samples = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let target_block: Vec<usize> = (0..spec.t_len).map(|_| rng.below(DATA_SYMBOLS)).collect();
        let mut inputs = Vec::with_capacity(total);
        inputs.extend_from_slice(&target_block);
        inputs.extend(std::iter::repeat_n(FILLER, spec.n_fill));
        inputs.push(TRIGGER);
        inputs.extend(std::iter::repeat_n(FILLER, spec.t_len));
        let mut targets = Vec::with_capacity(total);
        targets.extend(std::iter::repeat_n(FILLER, spec.t_len + spec.n_fill + 1));
        targets.extend_from_slice(&target_block);
        debug_assert_eq!(inputs.len(), total);
        debug_assert_eq!(targets.len(), total);
        samples.push(CopySample { inputs, targets });
    }
    CopyBatch { samples }
}

/// Mean-per-step cross-entropy of the best input-ignoring strategy:
/// filler everywhere, uniform over the 7 data symbols in the replay block.
pub fn memoryless_baseline_ce(spec: &CopyTaskSpec) -> f64 {
    if spec.t_len == 0 {
        return 0.0;
    }
    spec.t_len as f64 * (DATA_SYMBOLS as f64).ln() / spec.total_len() as f64
}

/// A benchmark task together with everything needed to draw batches.
#[derive(Debug, Clone)]
pub enum Task {
    Regression(RegressionTaskSpec),
    Copy(CopyTaskSpec),
}

#[derive(Debug, Clone)]
pub enum Batch {
    Regression(RegressionBatch),
    Copy(CopyBatch),
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Regression(_) => "regression",
            Task::Copy(_) => "copy",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Task::Regression(s) => s.seed,
            Task::Copy(s) => s.seed,
        }
    }

    pub fn draw(&self, batch_size: usize, rng: &mut Rng) -> Batch {
        match self {
            Task::Regression(spec) => Batch::Regression(gen_regression_batch(spec, batch_size, rng)),
            Task::Copy(spec) => Batch::Copy(gen_copy_batch(spec, batch_size, rng)),
        }
    }
}

//! Python bindings for the structured-operator recurrent models: cascades,
//! modReLU, task generators, analytic baselines and small training runs.
//!
//! Build with `cargo build -p cernn-py --release`; the resulting cdylib is
//! importable as `cernn` (see python/smoke_test.py for a loader).

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use cernn_core::cells::{lstm_hidden_matching_budget, CellFlavor, RecurrentCellConfig};
use cernn_core::complex::ComplexVector;
use cernn_core::linops::{apply_fourier, CascadeFlavor, DenseMatrixParts, FftDirection};
use cernn_core::models::Model;
use cernn_core::rng::Rng;
use cernn_core::tasks::{
    gen_copy_batch, gen_regression_batch, memoryless_baseline_ce, regression_mse_floor,
    CopyTaskSpec, RegressionTaskSpec, Task, ALPHABET,
};
use cernn_core::training::{train, AdamConfig, TrainLoopConfig, INIT_STREAM};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_vector(re: Vec<f64>, im: Vec<f64>) -> PyResult<ComplexVector> {
    ComplexVector::new(re, im).map_err(value_err)
}

fn cascade_flavor(name: &str) -> PyResult<CascadeFlavor> {
    match name {
        "unitary" | "urnn" => Ok(CascadeFlavor::Unitary),
        "complex-evolution" | "cernn" => Ok(CascadeFlavor::ComplexEvolution),
        other => Err(PyValueError::new_err(format!(
            "unknown cascade flavor '{other}'"
        ))),
    }
}

/// Structured complex linear operator cascade.
#[pyclass]
pub struct Cascade {
    inner: cernn_core::linops::Cascade,
}

#[pymethods]
impl Cascade {
    #[new]
    fn new(n: usize, flavor: &str, seed: u64) -> PyResult<Self> {
        if n == 0 {
            return Err(PyValueError::new_err("n must be positive"));
        }
        let flavor = cascade_flavor(flavor)?;
        let mut rng = Rng::stream(seed, INIT_STREAM);
        Ok(Cascade {
            inner: cernn_core::linops::Cascade::new(n, flavor, &mut rng),
        })
    }

    fn n(&self) -> usize {
        self.inner.n()
    }

    fn flavor(&self) -> &'static str {
        match self.inner.flavor() {
            CascadeFlavor::Unitary => "unitary",
            CascadeFlavor::ComplexEvolution => "complex-evolution",
        }
    }

    fn parameter_count(&self) -> usize {
        self.inner.parameter_count()
    }

    fn apply(&self, re: Vec<f64>, im: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let y = self.inner.apply(&to_vector(re, im)?).map_err(value_err)?;
        Ok((y.re, y.im))
    }

    fn get_params(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.inner.parameter_count()];
        self.inner.get_params(&mut out);
        out
    }

    fn set_params(&mut self, params: Vec<f64>) -> PyResult<()> {
        if params.len() != self.inner.parameter_count() {
            return Err(PyValueError::new_err(format!(
                "expected {} parameters, got {}",
                self.inner.parameter_count(),
                params.len()
            )));
        }
        self.inner.set_params(&params);
        Ok(())
    }

    /// Realized complex entries of the three diagonal stages.
    fn diagonal_entries(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        self.inner.diagonal_entries()
    }

    fn angle_norm_first_diagonal(&self) -> f64 {
        self.inner.angle_norm_first_diagonal()
    }

    /// Dense (re, im) matrices materialized column by column.
    fn to_dense(&self) -> PyResult<DenseMatrixParts> {
        self.inner.to_dense().map_err(value_err)
    }

    /// Unitary cascade re-expressed with free diagonals pinned onto the
    /// unit circle (same realized operator).
    fn to_complex_evolution(&self) -> PyResult<Cascade> {
        if self.inner.flavor() != CascadeFlavor::Unitary {
            return Err(PyValueError::new_err(
                "only a unitary cascade can be pinned onto free diagonals",
            ));
        }
        Ok(Cascade {
            inner: self.inner.to_complex_evolution(),
        })
    }
}

/// Unitary-normalized DFT of a complex vector.
#[pyfunction]
#[pyo3(signature = (re, im, inverse = false))]
fn fourier(re: Vec<f64>, im: Vec<f64>, inverse: bool) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let dir = if inverse {
        FftDirection::Inverse
    } else {
        FftDirection::Forward
    };
    let y = apply_fourier(&to_vector(re, im)?, dir).map_err(value_err)?;
    Ok((y.re, y.im))
}

/// modReLU: rescale each entry's modulus by relu(|z| + b), keep the phase.
#[pyfunction]
fn modrelu(re: Vec<f64>, im: Vec<f64>, b: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let y = cernn_core::activations::modrelu(&to_vector(re, im)?, &b).map_err(value_err)?;
    Ok((y.re, y.im))
}

#[pyfunction]
fn baseline_copy_ce(t_len: usize, n_fill: usize) -> f64 {
    memoryless_baseline_ce(&CopyTaskSpec::new(t_len, n_fill, 0))
}

#[pyfunction]
fn regression_noise_floor(n: usize, noise_std: f64) -> PyResult<f64> {
    let spec = RegressionTaskSpec::new(n, noise_std, 0).map_err(value_err)?;
    Ok(regression_mse_floor(&spec))
}

/// Copy-task batch as (inputs, targets) symbol-index sequences.
#[pyfunction]
fn copy_batch(
    t_len: usize,
    n_fill: usize,
    batch_size: usize,
    seed: u64,
) -> Vec<(Vec<usize>, Vec<usize>)> {
    let spec = CopyTaskSpec::new(t_len, n_fill, seed);
    let mut rng = Rng::stream(seed, 2);
    gen_copy_batch(&spec, batch_size, &mut rng)
        .samples
        .into_iter()
        .map(|s| (s.inputs, s.targets))
        .collect()
}

/// Regression batch as (xs, ys).
#[pyfunction]
fn regression_batch(
    n: usize,
    noise_std: f64,
    batch_size: usize,
    seed: u64,
) -> PyResult<DenseMatrixParts> {
    let spec = RegressionTaskSpec::new(n, noise_std, seed).map_err(value_err)?;
    let mut rng = Rng::stream(seed, 2);
    let batch = gen_regression_batch(&spec, batch_size, &mut rng);
    Ok((batch.xs, batch.ys))
}

#[pyfunction]
fn lstm_hidden_for_budget(budget: usize, input: usize, output_dim: usize) -> usize {
    lstm_hidden_matching_budget(budget, input, output_dim)
}

fn run_training(
    task: Task,
    mut model: Model,
    lr: f64,
    batch_size: usize,
    max_steps: u64,
    metrics_interval: u64,
    seed: u64,
) -> PyResult<Vec<(u64, f64)>> {
    let outcome = train(
        &task,
        &mut model,
        &AdamConfig::with_alpha(lr),
        &TrainLoopConfig {
            max_steps,
            batch_size,
            metrics_interval,
            seed,
        },
    )
    .map_err(value_err)?;
    Ok(outcome.records.iter().map(|r| (r.step, r.loss)).collect())
}

/// Train a model on the copy task; returns (step, loss) records.
#[pyfunction]
#[pyo3(signature = (model, n, t_len, n_fill, lr = 1e-3, batch_size = 64, max_steps = 500, metrics_interval = 50, seed = 1))]
#[allow(clippy::too_many_arguments)]
fn train_copy(
    model: &str,
    n: usize,
    t_len: usize,
    n_fill: usize,
    lr: f64,
    batch_size: usize,
    max_steps: u64,
    metrics_interval: u64,
    seed: u64,
) -> PyResult<Vec<(u64, f64)>> {
    let flavor = match model {
        "urnn" => CellFlavor::Urnn,
        "cernn" => CellFlavor::Cernn,
        "lstm" => CellFlavor::Lstm,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown copy-task model '{other}'"
            )))
        }
    };
    let cell = Model::new_cell(
        RecurrentCellConfig {
            hidden: n,
            input: ALPHABET,
            flavor,
            output_dim: ALPHABET,
            truncate_to: None,
        },
        &mut Rng::stream(seed, INIT_STREAM),
    )
    .map_err(value_err)?;
    run_training(
        Task::Copy(CopyTaskSpec::new(t_len, n_fill, seed)),
        cell,
        lr,
        batch_size,
        max_steps,
        metrics_interval,
        seed,
    )
}

/// Train a model on the regression task; returns (step, loss) records.
#[pyfunction]
#[pyo3(signature = (model, n, noise_std = 0.1, lr = 1e-3, batch_size = 32, max_steps = 2000, metrics_interval = 100, seed = 1))]
#[allow(clippy::too_many_arguments)]
fn train_regression(
    model: &str,
    n: usize,
    noise_std: f64,
    lr: f64,
    batch_size: usize,
    max_steps: u64,
    metrics_interval: u64,
    seed: u64,
) -> PyResult<Vec<(u64, f64)>> {
    let mut init_rng = Rng::stream(seed, INIT_STREAM);
    let m = match model {
        "dense" => Model::new_dense(n),
        "urnn" => Model::new_cascade_reg(n, CascadeFlavor::Unitary, &mut init_rng),
        "cernn" => Model::new_cascade_reg(n, CascadeFlavor::ComplexEvolution, &mut init_rng),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown regression model '{other}'"
            )))
        }
    };
    let task = Task::Regression(RegressionTaskSpec::new(n, noise_std, seed).map_err(value_err)?);
    run_training(task, m, lr, batch_size, max_steps, metrics_interval, seed)
}

#[pymodule]
fn cernn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Cascade>()?;
    m.add_function(wrap_pyfunction!(fourier, m)?)?;
    m.add_function(wrap_pyfunction!(modrelu, m)?)?;
    m.add_function(wrap_pyfunction!(baseline_copy_ce, m)?)?;
    m.add_function(wrap_pyfunction!(regression_noise_floor, m)?)?;
    m.add_function(wrap_pyfunction!(copy_batch, m)?)?;
    m.add_function(wrap_pyfunction!(regression_batch, m)?)?;
    m.add_function(wrap_pyfunction!(lstm_hidden_for_budget, m)?)?;
    m.add_function(wrap_pyfunction!(train_copy, m)?)?;
    m.add_function(wrap_pyfunction!(train_regression, m)?)?;
    Ok(())
}

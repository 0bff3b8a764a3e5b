//! Trainable model wrappers: a dense real matrix, a bare cascade used as a
//! regression matrix, and the recurrent cells. All expose one flat real
//! parameter vector with a fixed documented segment layout, and a
//! deterministic `loss_and_grad` over a task batch.

use crate::cells::{
    unroll, CellFlavor, CellParams, RecurrentCellConfig, Targets, UnrollOptions,
};
use crate::complex::ComplexVector;
use crate::error::{Error, Result};
use crate::linops::{Cascade, CascadeFlavor};
use crate::rng::Rng;
use crate::tasks::{Batch, CopyBatch, RegressionBatch};
use crate::training::Segment;

/// Plain real n x n matrix trained to imitate the generating process.
#[derive(Debug, Clone)]
pub struct DenseRegModel {
    pub n: usize,
    pub w: Vec<f64>, // row-major
}

impl DenseRegModel {
    /// Zero init: the problem is convex, any start converges.
    pub fn new(n: usize) -> DenseRegModel {
        DenseRegModel {
            n,
            w: vec![0.0; n * n],
        }
    }
}

/// A cascade applied once per sample; prediction is the real part of the
/// complex output (inputs are lifted with zero imaginary part).
#[derive(Debug, Clone)]
pub struct CascadeRegModel {
    pub cascade: Cascade,
}

/// Recurrent cell plus readout, unrolled over sequences.
#[derive(Debug, Clone)]
pub struct CellModel {
    pub cfg: RecurrentCellConfig,
    pub params: CellParams,
}

#[derive(Debug, Clone)]
pub enum Model {
    Dense(DenseRegModel),
    CascadeReg(CascadeRegModel),
    Cell(CellModel),
}

/// Shape description sufficient to rebuild a model skeleton (checkpoints).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ModelSpec {
    pub kind: String, // dense | urnn | cernn | lstm
    pub n: usize,
    pub input: usize,
    pub output_dim: usize,
    pub truncate_to: Option<usize>,
    /// For sequence models: whether the model runs on sequences (copy) or
    /// as a single-application regression matrix.
    pub sequence: bool,
}

impl Model {
    pub fn new_dense(n: usize) -> Model {
        Model::Dense(DenseRegModel::new(n))
    }

    pub fn new_cascade_reg(n: usize, flavor: CascadeFlavor, rng: &mut Rng) -> Model {
        Model::CascadeReg(CascadeRegModel {
            cascade: Cascade::new(n, flavor, rng),
        })
    }

    pub fn new_cell(cfg: RecurrentCellConfig, rng: &mut Rng) -> Result<Model> {
        let params = CellParams::init(&cfg, rng)?;
        Ok(Model::Cell(CellModel { cfg, params }))
    }

    /// Rebuild a model skeleton from its spec; parameters are then
    /// installed with `set_params` and the permutation (if any) with
    /// `set_permutation`.
    pub fn from_spec(spec: &ModelSpec) -> Result<Model> {
        let mut rng = Rng::new(0);
        match (spec.kind.as_str(), spec.sequence) {
            ("dense", false) => Ok(Model::new_dense(spec.n)),
            ("urnn", false) => Ok(Model::new_cascade_reg(
                spec.n,
                CascadeFlavor::Unitary,
                &mut rng,
            )),
            ("cernn", false) => Ok(Model::new_cascade_reg(
                spec.n,
                CascadeFlavor::ComplexEvolution,
                &mut rng,
            )),
            ("urnn", true) | ("cernn", true) | ("lstm", true) => {
                let flavor = match spec.kind.as_str() {
                    "urnn" => CellFlavor::Urnn,
                    "cernn" => CellFlavor::Cernn,
                    _ => CellFlavor::Lstm,
                };
                Model::new_cell(
                    RecurrentCellConfig {
                        hidden: spec.n,
                        input: spec.input,
                        flavor,
                        output_dim: spec.output_dim,
                        truncate_to: spec.truncate_to,
                    },
                    &mut rng,
                )
            }
            (kind, seq) => Err(Error::Config(format!(
                "cannot rebuild model kind '{kind}' (sequence = {seq})"
            ))),
        }
    }

    pub fn spec(&self) -> ModelSpec {
        match self {
            Model::Dense(m) => ModelSpec {
                kind: "dense".into(),
                n: m.n,
                input: 0,
                output_dim: 0,
                truncate_to: None,
                sequence: false,
            },
            Model::CascadeReg(m) => ModelSpec {
                kind: match m.cascade.flavor() {
                    CascadeFlavor::Unitary => "urnn".into(),
                    CascadeFlavor::ComplexEvolution => "cernn".into(),
                },
                n: m.cascade.n(),
                input: 0,
                output_dim: 0,
                truncate_to: None,
                sequence: false,
            },
            Model::Cell(m) => ModelSpec {
                kind: match m.cfg.flavor {
                    CellFlavor::Urnn => "urnn".into(),
                    CellFlavor::Cernn => "cernn".into(),
                    CellFlavor::Lstm => "lstm".into(),
                },
                n: m.cfg.hidden,
                input: m.cfg.input,
                output_dim: m.cfg.output_dim,
                truncate_to: m.cfg.truncate_to,
                sequence: true,
            },
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Model::Dense(m) => m.w.len(),
            Model::CascadeReg(m) => m.cascade.parameter_count(),
            Model::Cell(m) => m.params.param_count(&m.cfg),
        }
    }

    /// Trainable reals inside the structured cascade, if the model has one.
    pub fn structured_param_count(&self) -> Option<usize> {
        match self {
            Model::Dense(_) => None,
            Model::CascadeReg(m) => Some(m.cascade.parameter_count()),
            Model::Cell(m) => match &m.params {
                CellParams::Complex(p) => Some(p.cascade.parameter_count()),
                CellParams::Lstm(_) => None,
            },
        }
    }

    fn cascade(&self) -> Option<&Cascade> {
        match self {
            Model::Dense(_) => None,
            Model::CascadeReg(m) => Some(&m.cascade),
            Model::Cell(m) => match &m.params {
                CellParams::Complex(p) => Some(&p.cascade),
                CellParams::Lstm(_) => None,
            },
        }
    }

    pub fn angle_norm_u1(&self) -> Option<f64> {
        self.cascade().map(|c| c.angle_norm_first_diagonal())
    }

    /// Realized complex entries of each diagonal stage.
    pub fn diagonal_entries(&self) -> Option<Vec<(Vec<f64>, Vec<f64>)>> {
        self.cascade().map(|c| c.diagonal_entries())
    }

    pub fn permutation(&self) -> Option<Vec<usize>> {
        self.cascade().map(|c| c.permutation().to_vec())
    }

    pub fn set_permutation(&mut self, perm: Vec<usize>) -> Result<()> {
        match self {
            Model::Dense(_) => Err(Error::Config("dense model has no permutation".into())),
            Model::CascadeReg(m) => m.cascade.set_permutation(perm),
            Model::Cell(m) => match &mut m.params {
                CellParams::Complex(p) => p.cascade.set_permutation(perm),
                CellParams::Lstm(_) => Err(Error::Config("lstm has no permutation".into())),
            },
        }
    }

    pub fn segments(&self) -> Vec<Segment> {
        let raw: Vec<crate::cells::SegmentSpec> = match self {
            Model::Dense(m) => vec![("dense.weight".into(), "cell", vec![m.n, m.n])],
            Model::CascadeReg(m) => vec![(
                "cascade".into(),
                "operator",
                vec![m.cascade.parameter_count()],
            )],
            Model::Cell(m) => m.params.segments(&m.cfg),
        };
        let mut segments = Vec::with_capacity(raw.len());
        let mut offset = 0;
        for (name, owner, shape) in raw {
            let len: usize = shape.iter().product();
            segments.push(Segment {
                name,
                owner: owner.to_string(),
                shape,
                offset,
                len,
            });
            offset += len;
        }
        debug_assert_eq!(offset, self.param_count());
        segments
    }

    pub fn get_params(&self, out: &mut [f64]) {
        assert_eq!(out.len(), self.param_count());
        match self {
            Model::Dense(m) => out.copy_from_slice(&m.w),
            Model::CascadeReg(m) => m.cascade.get_params(out),
            Model::Cell(m) => m.params.get_flat(out),
        }
    }

    pub fn params_vec(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.param_count()];
        self.get_params(&mut v);
        v
    }

    pub fn set_params(&mut self, src: &[f64]) {
        assert_eq!(src.len(), self.param_count());
        match self {
            Model::Dense(m) => m.w.copy_from_slice(src),
            Model::CascadeReg(m) => m.cascade.set_params(src),
            Model::Cell(m) => m.params.set_flat(src),
        }
    }

    /// Mean loss over the batch and the gradient of every parameter, in
    /// the flat segment layout. Batch elements are reduced in order, so
    /// results are bit-reproducible.
    pub fn loss_and_grad(&self, batch: &Batch) -> Result<(f64, Vec<f64>)> {
        match (self, batch) {
            (Model::Dense(m), Batch::Regression(b)) => dense_loss_grad(m, b),
            (Model::CascadeReg(m), Batch::Regression(b)) => cascade_reg_loss_grad(m, b),
            (Model::Cell(m), Batch::Copy(b)) => cell_loss_grad(m, b),
            _ => Err(Error::Config(
                "model kind does not match batch kind".into(),
            )),
        }
    }
}

/// MSE with mean reduction over coordinates and batch; gradients for the
/// dense weight matrix.
fn dense_loss_grad(m: &DenseRegModel, batch: &RegressionBatch) -> Result<(f64, Vec<f64>)> {
    let n = m.n;
    let bsz = batch.xs.len();
    if bsz == 0 {
        return Err(Error::Config("empty batch".into()));
    }
    let inv = 1.0 / (bsz as f64 * n as f64);
    let mut loss = 0.0;
    let mut grad = vec![0.0; n * n];
    for (x, y) in batch.xs.iter().zip(batch.ys.iter()) {
        if x.len() != n || y.len() != n {
            return Err(Error::DimMismatch {
                context: "dense regression sample",
                expected: n,
                actual: x.len().min(y.len()),
            });
        }
        for i in 0..n {
            let row = i * n;
            let mut pred = 0.0;
            for j in 0..n {
                pred += m.w[row + j] * x[j];
            }
            let r = pred - y[i];
            loss += r * r * inv;
            let g = 2.0 * r * inv;
            for j in 0..n {
                grad[row + j] += g * x[j];
            }
        }
    }
    Ok((loss, grad))
}

fn cascade_reg_loss_grad(m: &CascadeRegModel, batch: &RegressionBatch) -> Result<(f64, Vec<f64>)> {
    let n = m.cascade.n();
    let bsz = batch.xs.len();
    if bsz == 0 {
        return Err(Error::Config("empty batch".into()));
    }
    let inv = 1.0 / (bsz as f64 * n as f64);
    let mut loss = 0.0;
    let mut grad = vec![0.0; m.cascade.parameter_count()];
    for (x, y) in batch.xs.iter().zip(batch.ys.iter()) {
        if x.len() != n || y.len() != n {
            return Err(Error::DimMismatch {
                context: "cascade regression sample",
                expected: n,
                actual: x.len().min(y.len()),
            });
        }
        let (pred, tape) = m.cascade.forward(&ComplexVector::from_real(x))?;
        // Loss reads only the real part; the cotangent has zero imaginary part.
        let mut g_out = ComplexVector::zeros(n);
        for i in 0..n {
            let r = pred.re[i] - y[i];
            loss += r * r * inv;
            g_out.re[i] = 2.0 * r * inv;
        }
        let (_, g_params) = m.cascade.vjp(&tape, &g_out)?;
        for (dst, src) in grad.iter_mut().zip(g_params.iter()) {
            *dst += src;
        }
    }
    Ok((loss, grad))
}

fn cell_loss_grad(m: &CellModel, batch: &CopyBatch) -> Result<(f64, Vec<f64>)> {
    let bsz = batch.samples.len();
    if bsz == 0 {
        return Err(Error::Config("empty batch".into()));
    }
    let count = m.params.param_count(&m.cfg);
    let mut grad = vec![0.0; count];
    let opts = UnrollOptions::default();
    let mut loss = 0.0;
    for sample in &batch.samples {
        let inputs = sample.one_hot_inputs();
        let targets = Targets::Classes(sample.targets.clone());
        let out = unroll(&m.cfg, &m.params, &inputs, &targets, &opts, &mut grad)?;
        loss += out.loss;
    }
    let inv = 1.0 / bsz as f64;
    loss *= inv;
    for g in grad.iter_mut() {
        *g *= inv;
    }
    Ok((loss, grad))
}

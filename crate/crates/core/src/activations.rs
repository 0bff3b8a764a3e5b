//! Pointwise nonlinearities and loss heads.
//!
//! modReLU rescales the modulus of each complex entry by
//! relu(|z| + b) while leaving the phase alone; b < 0 shrinks the active
//! region, b > 0 amplifies. At z = 0 (and anywhere on the dead side of
//! |z| + b = 0) the output and all gradients are defined to be zero.

use crate::complex::ComplexVector;
use crate::error::{Error, Result};

pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// modReLU: out_i = relu(|z_i| + b_i) * z_i / |z_i|.
pub fn modrelu(z: &ComplexVector, b: &[f64]) -> Result<ComplexVector> {
    if z.len() != b.len() {
        return Err(Error::DimMismatch {
            context: "modrelu",
            expected: z.len(),
            actual: b.len(),
        });
    }
    let mut out = ComplexVector::zeros(z.len());
    for i in 0..z.len() {
        let m = (z.re[i] * z.re[i] + z.im[i] * z.im[i]).sqrt();
        if m > 0.0 && m + b[i] > 0.0 {
            let scale = (m + b[i]) / m;
            out.re[i] = scale * z.re[i];
            out.im[i] = scale * z.im[i];
        }
    }
    Ok(out)
}

/// Gradient of modReLU for a real loss.
///
/// For active units (|z| + b > 0, z != 0), with m = |z| and s = (m + b)/m:
///   g_z = s * g - (b / m^3) * Re(conj(g) z) * z
///   g_b = Re(conj(g) z) / m
/// Dead units and z = 0 get exactly zero gradient.
pub fn modrelu_vjp(
    z: &ComplexVector,
    b: &[f64],
    g_out: &ComplexVector,
) -> Result<(ComplexVector, Vec<f64>)> {
    if z.len() != b.len() || z.len() != g_out.len() {
        return Err(Error::DimMismatch {
            context: "modrelu_vjp",
            expected: z.len(),
            actual: b.len().min(g_out.len()),
        });
    }
    let mut g_z = ComplexVector::zeros(z.len());
    let mut g_b = vec![0.0; z.len()];
    for i in 0..z.len() {
        let m = (z.re[i] * z.re[i] + z.im[i] * z.im[i]).sqrt();
        if m > 0.0 && m + b[i] > 0.0 {
            let s = (m + b[i]) / m;
            // Re(conj(g) z)
            let gz_dot = g_out.re[i] * z.re[i] + g_out.im[i] * z.im[i];
            let radial = b[i] / (m * m * m) * gz_dot;
            g_z.re[i] = s * g_out.re[i] - radial * z.re[i];
            g_z.im[i] = s * g_out.im[i] - radial * z.im[i];
            g_b[i] = gz_dot / m;
        }
    }
    Ok((g_z, g_b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossHead {
    MeanSquaredError,
    SoftmaxCrossEntropy { classes: usize },
}

/// Target of one prediction frame.
#[derive(Debug, Clone, Copy)]
pub enum TargetRef<'a> {
    Real(&'a [f64]),
    Class(usize),
}

impl LossHead {
    /// Loss and gradient w.r.t. the prediction for a single frame.
    ///
    /// MSE is the mean squared residual over coordinates; cross-entropy is
    /// the natural-log negative log-probability of the target class.
    pub fn loss_and_grad(&self, prediction: &[f64], target: TargetRef) -> Result<(f64, Vec<f64>)> {
        match (self, target) {
            (LossHead::MeanSquaredError, TargetRef::Real(t)) => {
                if t.len() != prediction.len() {
                    return Err(Error::DimMismatch {
                        context: "mse target",
                        expected: prediction.len(),
                        actual: t.len(),
                    });
                }
                Ok(mse_loss_grad(prediction, t))
            }
            (LossHead::SoftmaxCrossEntropy { classes }, TargetRef::Class(c)) => {
                if prediction.len() != *classes {
                    return Err(Error::DimMismatch {
                        context: "cross-entropy logits",
                        expected: *classes,
                        actual: prediction.len(),
                    });
                }
                softmax_ce_loss_grad(prediction, c)
            }
            _ => Err(Error::Config(
                "loss head and target kind do not match".to_string(),
            )),
        }
    }
}

/// Mean squared residual over all coordinates and its gradient.
pub fn mse_loss_grad(prediction: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = prediction.len();
    let inv = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; n];
    for i in 0..n {
        let r = prediction[i] - target[i];
        loss += r * r * inv;
        grad[i] = 2.0 * r * inv;
    }
    (loss, grad)
}

/// Numerically stable softmax cross-entropy (natural log) and its gradient
/// w.r.t. the logits: softmax(logits) - onehot(target).
pub fn softmax_ce_loss_grad(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    let k = logits.len();
    if target >= k {
        return Err(Error::ClassOutOfRange {
            class: target,
            classes: k,
        });
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs = vec![0.0; k];
    let mut z = 0.0;
    for i in 0..k {
        probs[i] = (logits[i] - max).exp();
        z += probs[i];
    }
    let inv_z = 1.0 / z;
    for p in probs.iter_mut() {
        *p *= inv_z;
    }
    let loss = -(probs[target].max(f64::MIN_POSITIVE)).ln();
    let mut grad = probs;
    grad[target] -= 1.0;
    Ok((loss, grad))
}

/// Softmax probabilities alone (diagnostics and tests).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= z;
    }
    probs
}

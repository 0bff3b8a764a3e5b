//! Trainable diagonal stages.
//!
//! `UnitaryDiagonal` keeps every entry on the unit circle by construction:
//! the parameters are angles and the realized entry is exp(-i theta).
//! `FreeDiagonal` stores unconstrained complex entries as separate real and
//! imaginary parameter arrays.

use crate::complex::ComplexVector;
use crate::error::{Error, Result};
use crate::rng::Rng;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct UnitaryDiagonal {
    theta: Vec<f64>,
}

impl UnitaryDiagonal {
    pub fn new(theta: Vec<f64>) -> Self {
        UnitaryDiagonal { theta }
    }

    pub fn random(n: usize, rng: &mut Rng) -> Self {
        UnitaryDiagonal {
            theta: (0..n).map(|_| rng.uniform(-PI, PI)).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    /// Realized complex entries exp(-i theta_i) as (re, im) arrays.
    pub fn entries(&self) -> (Vec<f64>, Vec<f64>) {
        let re = self.theta.iter().map(|t| t.cos()).collect();
        let im = self.theta.iter().map(|t| -t.sin()).collect();
        (re, im)
    }

    pub fn apply(&self, x: &ComplexVector) -> Result<ComplexVector> {
        if x.len() != self.n() {
            return Err(Error::DimMismatch {
                context: "UnitaryDiagonal::apply",
                expected: self.n(),
                actual: x.len(),
            });
        }
        let mut out = ComplexVector::zeros(self.n());
        for i in 0..self.n() {
            let c = self.theta[i].cos();
            let s = self.theta[i].sin();
            // (c - i s)(x_re + i x_im)
            out.re[i] = c * x.re[i] + s * x.im[i];
            out.im[i] = c * x.im[i] - s * x.re[i];
        }
        Ok(out)
    }

    /// Cotangent through the stage: multiply by the conjugate exp(+i theta).
    pub fn vjp_input(&self, g: &ComplexVector) -> ComplexVector {
        debug_assert_eq!(g.len(), self.n());
        let mut out = ComplexVector::zeros(self.n());
        for i in 0..self.n() {
            let c = self.theta[i].cos();
            let s = self.theta[i].sin();
            out.re[i] = c * g.re[i] - s * g.im[i];
            out.im[i] = c * g.im[i] + s * g.re[i];
        }
        out
    }

    /// dL/d theta_i = Im(conj(g_i) * y_i) with y the stage output.
    pub fn vjp_params(&self, x_in: &ComplexVector, g: &ComplexVector, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n());
        for i in 0..self.n() {
            let c = self.theta[i].cos();
            let s = self.theta[i].sin();
            let y_re = c * x_in.re[i] + s * x_in.im[i];
            let y_im = c * x_in.im[i] - s * x_in.re[i];
            // Im(conj(g) y) = g_re * y_im - g_im * y_re
            out[i] = g.re[i] * y_im - g.im[i] * y_re;
        }
    }
}

#[derive(Debug, Clone)]
pub struct FreeDiagonal {
    d_re: Vec<f64>,
    d_im: Vec<f64>,
}

impl FreeDiagonal {
    pub fn new(d_re: Vec<f64>, d_im: Vec<f64>) -> Result<Self> {
        if d_re.len() != d_im.len() {
            return Err(Error::DimMismatch {
                context: "FreeDiagonal::new",
                expected: d_re.len(),
                actual: d_im.len(),
            });
        }
        Ok(FreeDiagonal { d_re, d_im })
    }

    /// Entries pinned on the unit circle: d_i = exp(-i theta_i). Drawing the
    /// angles from the same stream as `UnitaryDiagonal::random` makes a
    /// fresh complex-evolution cascade start from a valid unitary one.
    pub fn from_angles(theta: &[f64]) -> Self {
        FreeDiagonal {
            d_re: theta.iter().map(|t| t.cos()).collect(),
            d_im: theta.iter().map(|t| -t.sin()).collect(),
        }
    }

    pub fn random_on_circle(n: usize, rng: &mut Rng) -> Self {
        let theta: Vec<f64> = (0..n).map(|_| rng.uniform(-PI, PI)).collect();
        FreeDiagonal::from_angles(&theta)
    }

    pub fn n(&self) -> usize {
        self.d_re.len()
    }

    pub fn entries(&self) -> (&[f64], &[f64]) {
        (&self.d_re, &self.d_im)
    }

    pub fn entries_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.d_re, &mut self.d_im)
    }

    pub fn max_modulus(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n() {
            worst = worst.max((self.d_re[i] * self.d_re[i] + self.d_im[i] * self.d_im[i]).sqrt());
        }
        worst
    }

    pub fn apply(&self, x: &ComplexVector) -> Result<ComplexVector> {
        if x.len() != self.n() {
            return Err(Error::DimMismatch {
                context: "FreeDiagonal::apply",
                expected: self.n(),
                actual: x.len(),
            });
        }
        let mut out = ComplexVector::zeros(self.n());
        for i in 0..self.n() {
            out.re[i] = self.d_re[i] * x.re[i] - self.d_im[i] * x.im[i];
            out.im[i] = self.d_re[i] * x.im[i] + self.d_im[i] * x.re[i];
        }
        Ok(out)
    }

    /// Cotangent through the stage: multiply by conj(d).
    pub fn vjp_input(&self, g: &ComplexVector) -> ComplexVector {
        debug_assert_eq!(g.len(), self.n());
        let mut out = ComplexVector::zeros(self.n());
        for i in 0..self.n() {
            out.re[i] = self.d_re[i] * g.re[i] + self.d_im[i] * g.im[i];
            out.im[i] = self.d_re[i] * g.im[i] - self.d_im[i] * g.re[i];
        }
        out
    }

    /// Parameter gradients, laid out as [d(re); d(im)] in `out`.
    pub fn vjp_params(&self, x_in: &ComplexVector, g: &ComplexVector, out: &mut [f64]) {
        let n = self.n();
        debug_assert_eq!(out.len(), 2 * n);
        for i in 0..n {
            // dL/d d_re = Re(conj(g) x); dL/d d_im = Re(conj(g) * i x)
            out[i] = g.re[i] * x_in.re[i] + g.im[i] * x_in.im[i];
            out[n + i] = -g.re[i] * x_in.im[i] + g.im[i] * x_in.re[i];
        }
    }
}

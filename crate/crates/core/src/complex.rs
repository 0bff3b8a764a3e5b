//! Dense complex vectors stored as split real/imaginary arrays.
//!
//! Every operator input, hidden state and backward cotangent in the crate
//! is one of these. Gradients of a real loss with respect to a complex
//! quantity are carried in the same representation: `re[i]` holds
//! dL/d(Re z_i) and `im[i]` holds dL/d(Im z_i).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexVector {
    pub fn new(re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::DimMismatch {
                context: "ComplexVector::new",
                expected: re.len(),
                actual: im.len(),
            });
        }
        Ok(ComplexVector { re, im })
    }

    pub fn zeros(n: usize) -> Self {
        ComplexVector {
            re: vec![0.0; n],
            im: vec![0.0; n],
        }
    }

    /// Real vector lifted to complex with zero imaginary part.
    pub fn from_real(re: &[f64]) -> Self {
        ComplexVector {
            re: re.to_vec(),
            im: vec![0.0; re.len()],
        }
    }

    /// Standard basis vector `e_i`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = ComplexVector::zeros(n);
        v.re[i] = 1.0;
        v
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.len() {
            acc += self.re[i] * self.re[i] + self.im[i] * self.im[i];
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.re.iter().all(|x| x.is_finite()) && self.im.iter().all(|x| x.is_finite())
    }

    /// Conjugated inner product `<self, other> = sum_i conj(self_i) * other_i`,
    /// returned as (re, im).
    pub fn dot_conj(&self, other: &ComplexVector) -> (f64, f64) {
        debug_assert_eq!(self.len(), other.len());
        let mut re = 0.0;
        let mut im = 0.0;
        for i in 0..self.len() {
            re += self.re[i] * other.re[i] + self.im[i] * other.im[i];
            im += self.re[i] * other.im[i] - self.im[i] * other.re[i];
        }
        (re, im)
    }

    pub fn add_assign(&mut self, other: &ComplexVector) {
        debug_assert_eq!(self.len(), other.len());
        for i in 0..self.len() {
            self.re[i] += other.re[i];
            self.im[i] += other.im[i];
        }
    }

    pub fn scale(&mut self, c: f64) {
        for i in 0..self.len() {
            self.re[i] *= c;
            self.im[i] *= c;
        }
    }

    /// Largest componentwise deviation from `other`, across both parts.
    pub fn max_abs_diff(&self, other: &ComplexVector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            worst = worst
                .max((self.re[i] - other.re[i]).abs())
                .max((self.im[i] - other.im[i]).abs());
        }
        worst
    }

    /// Random vector with both parts uniform in (-1, 1).
    pub fn random(n: usize, rng: &mut crate::rng::Rng) -> Self {
        let mut v = ComplexVector::zeros(n);
        for i in 0..n {
            v.re[i] = rng.uniform(-1.0, 1.0);
            v.im[i] = rng.uniform(-1.0, 1.0);
        }
        v
    }
}

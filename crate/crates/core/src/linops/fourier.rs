//! Unitary discrete Fourier transform.
//!
//! Symmetric 1/sqrt(N) normalization in both directions so each direction
//! is unitary on its own. Powers of two take the radix-2 in-place path;
//! any other length falls back to the direct O(N^2) sum.

use crate::complex::ComplexVector;
use crate::error::{Error, Result};
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FftDirection {
    Forward,
    Inverse,
}

impl FftDirection {
    pub fn flipped(self) -> FftDirection {
        match self {
            FftDirection::Forward => FftDirection::Inverse,
            FftDirection::Inverse => FftDirection::Forward,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FourierOp {
    n: usize,
    direction: FftDirection,
    // roots[k] = exp(-2 pi i k / n); the inverse direction conjugates on use.
    roots_re: Vec<f64>,
    roots_im: Vec<f64>,
}

impl FourierOp {
    pub fn new(n: usize, direction: FftDirection) -> Self {
        assert!(n >= 1, "FourierOp needs n >= 1");
        let mut roots_re = Vec::with_capacity(n);
        let mut roots_im = Vec::with_capacity(n);
        for k in 0..n {
            let phi = -(TAU * k as f64) / n as f64;
            roots_re.push(phi.cos());
            roots_im.push(phi.sin());
        }
        FourierOp {
            n,
            direction,
            roots_re,
            roots_im,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn direction(&self) -> FftDirection {
        self.direction
    }

    pub fn apply(&self, x: &ComplexVector) -> Result<ComplexVector> {
        self.apply_dir(x, self.direction)
    }

    /// The adjoint of a unitary transform is its inverse: just flip direction.
    pub fn vjp(&self, g: &ComplexVector) -> Result<ComplexVector> {
        self.apply_dir(g, self.direction.flipped())
    }

    fn apply_dir(&self, x: &ComplexVector, dir: FftDirection) -> Result<ComplexVector> {
        if x.len() != self.n {
            return Err(Error::DimMismatch {
                context: "FourierOp::apply",
                expected: self.n,
                actual: x.len(),
            });
        }
        let mut out = x.clone();
        if self.n.is_power_of_two() {
            self.fft_pow2(&mut out.re, &mut out.im, dir);
        } else {
            out = self.dft_direct(x, dir);
        }
        let scale = 1.0 / (self.n as f64).sqrt();
        out.scale(scale);
        Ok(out)
    }

    fn fft_pow2(&self, re: &mut [f64], im: &mut [f64], dir: FftDirection) {
        let n = self.n;
        if n == 1 {
            return;
        }
        let shift = (n - 1).leading_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> shift;
            if i < j {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let conj = match dir {
            FftDirection::Forward => 1.0,
            FftDirection::Inverse => -1.0,
        };
        let mut m = 2;
        while m <= n {
            let stride = n / m;
            for s in (0..n).step_by(m) {
                for k in 0..m / 2 {
                    let wr = self.roots_re[k * stride];
                    let wi = conj * self.roots_im[k * stride];
                    let a = s + k;
                    let b = s + k + m / 2;
                    let tr = wr * re[b] - wi * im[b];
                    let ti = wr * im[b] + wi * re[b];
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            m <<= 1;
        }
    }

    fn dft_direct(&self, x: &ComplexVector, dir: FftDirection) -> ComplexVector {
        let n = self.n;
        let conj = match dir {
            FftDirection::Forward => 1.0,
            FftDirection::Inverse => -1.0,
        };
        let mut out = ComplexVector::zeros(n);
        for k in 0..n {
            let mut acc_re = 0.0;
            let mut acc_im = 0.0;
            for j in 0..n {
                let idx = (j * k) % n;
                let wr = self.roots_re[idx];
                let wi = conj * self.roots_im[idx];
                acc_re += wr * x.re[j] - wi * x.im[j];
                acc_im += wr * x.im[j] + wi * x.re[j];
            }
            out.re[k] = acc_re;
            out.im[k] = acc_im;
        }
        out
    }
}

/// One-shot unitary DFT of `x`.
pub fn apply_fourier(x: &ComplexVector, direction: FftDirection) -> Result<ComplexVector> {
    FourierOp::new(x.len().max(1), direction).apply(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    /// Independent brute-force oracle: textbook double loop evaluating the
    /// DFT sum from scratch, no shared code with the implementation above.
    fn brute_force_dft(x: &ComplexVector, direction: FftDirection) -> ComplexVector {
        let n = x.len();
        let sign = match direction {
            FftDirection::Forward => -1.0,
            FftDirection::Inverse => 1.0,
        };
        let mut out = ComplexVector::zeros(n);
        for k in 0..n {
            let mut acc_re = 0.0;
            let mut acc_im = 0.0;
            for j in 0..n {
                let phi = sign * TAU * (j as f64) * (k as f64) / n as f64;
                acc_re += phi.cos() * x.re[j] - phi.sin() * x.im[j];
                acc_im += phi.cos() * x.im[j] + phi.sin() * x.re[j];
            }
            out.re[k] = acc_re / (n as f64).sqrt();
            out.im[k] = acc_im / (n as f64).sqrt();
        }
        out
    }

    #[test]
    fn delta_transforms_to_constant() {
        let x = ComplexVector::basis(4, 0);
        let y = apply_fourier(&x, FftDirection::Forward).unwrap();
        for i in 0..4 {
            assert!((y.re[i] - 0.5).abs() < 1e-15);
            assert!(y.im[i].abs() < 1e-15);
        }
    }

    #[test]
    fn forward_then_inverse_is_identity() {
        let mut rng = Rng::new(1);
        let x = ComplexVector::random(8, &mut rng);
        let y = apply_fourier(&x, FftDirection::Forward).unwrap();
        let back = apply_fourier(&y, FftDirection::Inverse).unwrap();
        assert!(back.max_abs_diff(&x) < 1e-12);
    }

    #[test]
    fn matches_brute_force_oracle_pow2() {
        let mut rng = Rng::new(101);
        let x = ComplexVector::random(16, &mut rng);
        for dir in [FftDirection::Forward, FftDirection::Inverse] {
            let fast = apply_fourier(&x, dir).unwrap();
            let slow = brute_force_dft(&x, dir);
            assert!(
                fast.max_abs_diff(&slow) < 1e-12,
                "direction {dir:?} deviates from oracle"
            );
        }
    }

    #[test]
    fn matches_brute_force_oracle_non_pow2() {
        let mut rng = Rng::new(102);
        for n in [3usize, 5, 6, 7, 12] {
            let x = ComplexVector::random(n, &mut rng);
            let fast = apply_fourier(&x, FftDirection::Forward).unwrap();
            let slow = brute_force_dft(&x, FftDirection::Forward);
            assert!(fast.max_abs_diff(&slow) < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn norm_preserved() {
        let mut rng = Rng::new(7);
        for n in [1usize, 2, 8, 64, 100] {
            let x = ComplexVector::random(n, &mut rng);
            let y = apply_fourier(&x, FftDirection::Forward).unwrap();
            assert!(
                (y.norm() - x.norm()).abs() / x.norm() < 1e-12,
                "norm drift at n = {n}"
            );
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let op = FourierOp::new(8, FftDirection::Forward);
        let err = op.apply(&ComplexVector::zeros(4)).unwrap_err();
        assert_eq!(
            err,
            crate::error::Error::DimMismatch {
                context: "FourierOp::apply",
                expected: 8,
                actual: 4
            }
        );
    }
}

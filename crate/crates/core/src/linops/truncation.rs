//! Dimension truncation: keep the first k components, zero-pad on the way
//! back. Lets a cascade project from a higher to a lower dimension without
//! a dense bottleneck layer.

use crate::complex::ComplexVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct TruncationOp {
    n_in: usize,
    k_keep: usize,
}

impl TruncationOp {
    pub fn new(n_in: usize, k_keep: usize) -> Result<Self> {
        if k_keep > n_in {
            return Err(Error::InvalidTruncation {
                keep: k_keep,
                len: n_in,
            });
        }
        Ok(TruncationOp { n_in, k_keep })
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn k_keep(&self) -> usize {
        self.k_keep
    }

    pub fn forward(&self, x: &ComplexVector) -> Result<ComplexVector> {
        if x.len() != self.n_in {
            return Err(Error::DimMismatch {
                context: "TruncationOp::forward",
                expected: self.n_in,
                actual: x.len(),
            });
        }
        Ok(ComplexVector {
            re: x.re[..self.k_keep].to_vec(),
            im: x.im[..self.k_keep].to_vec(),
        })
    }

    pub fn adjoint(&self, g: &ComplexVector) -> Result<ComplexVector> {
        if g.len() != self.k_keep {
            return Err(Error::DimMismatch {
                context: "TruncationOp::adjoint",
                expected: self.k_keep,
                actual: g.len(),
            });
        }
        let mut out = ComplexVector::zeros(self.n_in);
        out.re[..self.k_keep].copy_from_slice(&g.re);
        out.im[..self.k_keep].copy_from_slice(&g.im);
        Ok(out)
    }
}

/// Keep the first k components of x.
pub fn truncate(x: &ComplexVector, k: usize) -> Result<ComplexVector> {
    TruncationOp::new(x.len(), k)?.forward(x)
}

/// Zero-pad a length-k cotangent back to length n.
pub fn truncate_adjoint(g: &ComplexVector, n: usize) -> Result<ComplexVector> {
    TruncationOp::new(n, g.len())?.adjoint(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn keep_all_is_identity() {
        let mut rng = Rng::new(6);
        let x = ComplexVector::random(5, &mut rng);
        assert_eq!(truncate(&x, 5).unwrap(), x);
    }

    #[test]
    fn drop_and_pad() {
        let x = ComplexVector::new(vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]).unwrap();
        let t = truncate(&x, 2).unwrap();
        assert_eq!(t.re, vec![1.0, 2.0]);
        let padded = truncate_adjoint(&t, 3).unwrap();
        assert_eq!(padded.re, vec![1.0, 2.0, 0.0]);
        assert_eq!(padded.im, vec![4.0, 5.0, 0.0]);
    }

    #[test]
    fn adjoint_identity_numerically() {
        let mut rng = Rng::new(66);
        for _ in 0..50 {
            let n = 3 + rng.below(13);
            let k = 1 + rng.below(n);
            let x = ComplexVector::random(n, &mut rng);
            let g = ComplexVector::random(k, &mut rng);
            let lhs = truncate(&x, k).unwrap().dot_conj(&g);
            let rhs = x.dot_conj(&truncate_adjoint(&g, n).unwrap());
            assert!((lhs.0 - rhs.0).abs() < 1e-12);
            assert!((lhs.1 - rhs.1).abs() < 1e-12);
        }
    }

    #[test]
    fn oversized_keep_rejected() {
        assert!(TruncationOp::new(3, 4).is_err());
    }
}

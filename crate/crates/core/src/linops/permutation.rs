//! Fixed (non-trainable) column permutation.

use crate::complex::ComplexVector;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone)]
pub struct PermutationOp {
    perm: Vec<usize>,
}

impl PermutationOp {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || seen[p] {
                return Err(Error::InvalidPermutation { n });
            }
            seen[p] = true;
        }
        Ok(PermutationOp { perm })
    }

    /// Uniform random permutation, frozen after construction.
    pub fn random(n: usize, rng: &mut Rng) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        PermutationOp { perm }
    }

    pub fn identity(n: usize) -> Self {
        PermutationOp {
            perm: (0..n).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse(&self) -> PermutationOp {
        let mut inv = vec![0usize; self.n()];
        for (i, &p) in self.perm.iter().enumerate() {
            inv[p] = i;
        }
        PermutationOp { perm: inv }
    }

    /// out_i = x[perm[i]]
    pub fn apply(&self, x: &ComplexVector) -> Result<ComplexVector> {
        if x.len() != self.n() {
            return Err(Error::DimMismatch {
                context: "PermutationOp::apply",
                expected: self.n(),
                actual: x.len(),
            });
        }
        let mut out = ComplexVector::zeros(self.n());
        for (i, &p) in self.perm.iter().enumerate() {
            out.re[i] = x.re[p];
            out.im[i] = x.im[p];
        }
        Ok(out)
    }

    /// The adjoint of a permutation is its inverse: scatter instead of gather.
    pub fn vjp_input(&self, g: &ComplexVector) -> ComplexVector {
        debug_assert_eq!(g.len(), self.n());
        let mut out = ComplexVector::zeros(self.n());
        for (i, &p) in self.perm.iter().enumerate() {
            out.re[p] = g.re[i];
            out.im[p] = g.im[i];
        }
        out
    }
}

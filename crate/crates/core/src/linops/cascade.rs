//! The structured state-transition operator.
//!
//! Both flavors share one fixed stage order, applied left to right:
//!
//!   diag1, fft, reflect1, permute, diag2, ifft, reflect2, diag3
//!
//! The unitary flavor uses angle-parameterized diagonals (7N trainable
//! reals: 3N angles + 4N reflector components); the complex-evolution
//! flavor swaps in unconstrained complex diagonals (10N trainable reals).
//! The permutation and the FFT pair carry no trainable parameters.

use crate::complex::ComplexVector;
use crate::error::{Error, Result};
use crate::linops::diagonal::{FreeDiagonal, UnitaryDiagonal};
use crate::linops::fourier::{FftDirection, FourierOp};
use crate::linops::householder::HouseholderReflector;
use crate::linops::permutation::PermutationOp;
use crate::rng::Rng;
use std::f64::consts::PI;

/// Row-major real and imaginary parts of a dense complex matrix.
pub type DenseMatrixParts = (Vec<Vec<f64>>, Vec<Vec<f64>>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CascadeFlavor {
    Unitary,
    ComplexEvolution,
}

#[derive(Debug, Clone)]
pub enum Stage {
    UnitaryDiag(UnitaryDiagonal),
    FreeDiag(FreeDiagonal),
    Fourier(FourierOp),
    Reflect(HouseholderReflector),
    Permute(PermutationOp),
}

impl Stage {
    fn trainable_len(&self, n: usize) -> usize {
        match self {
            Stage::UnitaryDiag(_) => n,
            Stage::FreeDiag(_) => 2 * n,
            Stage::Reflect(_) => 2 * n,
            Stage::Fourier(_) | Stage::Permute(_) => 0,
        }
    }

    fn apply(&self, x: &ComplexVector) -> Result<ComplexVector> {
        match self {
            Stage::UnitaryDiag(d) => d.apply(x),
            Stage::FreeDiag(d) => d.apply(x),
            Stage::Fourier(f) => f.apply(x),
            Stage::Reflect(r) => r.apply(x),
            Stage::Permute(p) => p.apply(x),
        }
    }

    fn vjp_input(&self, g: &ComplexVector) -> Result<ComplexVector> {
        match self {
            Stage::UnitaryDiag(d) => Ok(d.vjp_input(g)),
            Stage::FreeDiag(d) => Ok(d.vjp_input(g)),
            Stage::Fourier(f) => f.vjp(g),
            Stage::Reflect(r) => Ok(r.vjp_input(g)),
            Stage::Permute(p) => Ok(p.vjp_input(g)),
        }
    }

    fn vjp_params(&self, x_in: &ComplexVector, g: &ComplexVector, out: &mut [f64]) {
        match self {
            Stage::UnitaryDiag(d) => d.vjp_params(x_in, g, out),
            Stage::FreeDiag(d) => d.vjp_params(x_in, g, out),
            Stage::Reflect(r) => r.vjp_params(x_in, g, out),
            Stage::Fourier(_) | Stage::Permute(_) => debug_assert!(out.is_empty()),
        }
    }
}

/// Recording of one forward pass: the input to every stage, kept so the
/// backward pass can recompute local Jacobian products.
#[derive(Debug, Clone)]
pub struct CascadeTape {
    n: usize,
    flavor: CascadeFlavor,
    stage_inputs: Vec<ComplexVector>,
}

#[derive(Debug, Clone)]
pub struct Cascade {
    n: usize,
    flavor: CascadeFlavor,
    stages: Vec<Stage>,
}

impl Cascade {
    /// Unitary cascade with randomly initialized trainable stages:
    /// angles ~ U(-pi, pi), reflector components ~ U(-1, 1), permutation
    /// drawn once from the same stream and frozen.
    pub fn new_unitary(n: usize, rng: &mut Rng) -> Self {
        assert!(n >= 1);
        let d1 = UnitaryDiagonal::random(n, rng);
        let r1 = HouseholderReflector::random(n, rng);
        let perm = PermutationOp::random(n, rng);
        let d2 = UnitaryDiagonal::random(n, rng);
        let r2 = HouseholderReflector::random(n, rng);
        let d3 = UnitaryDiagonal::random(n, rng);
        Cascade {
            n,
            flavor: CascadeFlavor::Unitary,
            stages: Self::arrange(
                n,
                Stage::UnitaryDiag(d1),
                Stage::Reflect(r1),
                Stage::Permute(perm),
                Stage::UnitaryDiag(d2),
                Stage::Reflect(r2),
                Stage::UnitaryDiag(d3),
            ),
        }
    }

    /// Complex-evolution cascade. Consumes the seed stream in exactly the
    /// same order as `new_unitary` and starts with all diagonals on the
    /// unit circle, so equal seeds give identical initial operators in the
    /// two flavors.
    pub fn new_complex_evolution(n: usize, rng: &mut Rng) -> Self {
        assert!(n >= 1);
        let d1 = FreeDiagonal::random_on_circle(n, rng);
        let r1 = HouseholderReflector::random(n, rng);
        let perm = PermutationOp::random(n, rng);
        let d2 = FreeDiagonal::random_on_circle(n, rng);
        let r2 = HouseholderReflector::random(n, rng);
        let d3 = FreeDiagonal::random_on_circle(n, rng);
        Cascade {
            n,
            flavor: CascadeFlavor::ComplexEvolution,
            stages: Self::arrange(
                n,
                Stage::FreeDiag(d1),
                Stage::Reflect(r1),
                Stage::Permute(perm),
                Stage::FreeDiag(d2),
                Stage::Reflect(r2),
                Stage::FreeDiag(d3),
            ),
        }
    }

    pub fn new(n: usize, flavor: CascadeFlavor, rng: &mut Rng) -> Self {
        match flavor {
            CascadeFlavor::Unitary => Cascade::new_unitary(n, rng),
            CascadeFlavor::ComplexEvolution => Cascade::new_complex_evolution(n, rng),
        }
    }

    fn arrange(
        n: usize,
        d1: Stage,
        r1: Stage,
        perm: Stage,
        d2: Stage,
        r2: Stage,
        d3: Stage,
    ) -> Vec<Stage> {
        vec![
            d1,
            Stage::Fourier(FourierOp::new(n, FftDirection::Forward)),
            r1,
            perm,
            d2,
            Stage::Fourier(FourierOp::new(n, FftDirection::Inverse)),
            r2,
            d3,
        ]
    }

    /// Pin a unitary cascade's diagonals onto a free-diagonal cascade with
    /// the same realized operator (the superset embedding).
    pub fn to_complex_evolution(&self) -> Cascade {
        assert_eq!(self.flavor, CascadeFlavor::Unitary);
        let stages = self
            .stages
            .iter()
            .map(|s| match s {
                Stage::UnitaryDiag(d) => Stage::FreeDiag(FreeDiagonal::from_angles(d.theta())),
                other => other.clone(),
            })
            .collect();
        Cascade {
            n: self.n,
            flavor: CascadeFlavor::ComplexEvolution,
            stages,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn flavor(&self) -> CascadeFlavor {
        self.flavor
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// Total trainable real scalars: 7N unitary, 10N complex-evolution.
    pub fn parameter_count(&self) -> usize {
        self.stages.iter().map(|s| s.trainable_len(self.n)).sum()
    }

    /// The frozen permutation, needed to reconstruct the cascade from a
    /// checkpoint (it is structure, not a trainable parameter).
    pub fn permutation(&self) -> &[usize] {
        for s in &self.stages {
            if let Stage::Permute(p) = s {
                return p.indices();
            }
        }
        unreachable!("cascade always holds a permutation stage")
    }

    pub fn set_permutation(&mut self, perm: Vec<usize>) -> Result<()> {
        if perm.len() != self.n {
            return Err(Error::DimMismatch {
                context: "Cascade::set_permutation",
                expected: self.n,
                actual: perm.len(),
            });
        }
        let op = PermutationOp::new(perm)?;
        for s in &mut self.stages {
            if let Stage::Permute(p) = s {
                *p = op;
                return Ok(());
            }
        }
        unreachable!("cascade always holds a permutation stage")
    }

    /// Forward application without gradient recording.
    pub fn apply(&self, x: &ComplexVector) -> Result<ComplexVector> {
        if x.len() != self.n {
            return Err(Error::DimMismatch {
                context: "Cascade::apply",
                expected: self.n,
                actual: x.len(),
            });
        }
        let mut cur = x.clone();
        for stage in &self.stages {
            cur = stage.apply(&cur)?;
        }
        Ok(cur)
    }

    /// Forward application recording stage activations for the backward pass.
    pub fn forward(&self, x: &ComplexVector) -> Result<(ComplexVector, CascadeTape)> {
        if x.len() != self.n {
            return Err(Error::DimMismatch {
                context: "Cascade::forward",
                expected: self.n,
                actual: x.len(),
            });
        }
        let mut stage_inputs = Vec::with_capacity(self.stages.len());
        let mut cur = x.clone();
        for stage in &self.stages {
            stage_inputs.push(cur.clone());
            cur = stage.apply(&cur)?;
        }
        Ok((
            cur,
            CascadeTape {
                n: self.n,
                flavor: self.flavor,
                stage_inputs,
            },
        ))
    }

    /// Vector-Jacobian product through the whole cascade.
    ///
    /// Returns the cotangent at the input and the gradient of every
    /// trainable real parameter in flat canonical order (stage order; a
    /// free diagonal contributes [d re; d im], a reflector [d v_re; d v_im]).
    pub fn vjp(&self, tape: &CascadeTape, g_out: &ComplexVector) -> Result<(ComplexVector, Vec<f64>)> {
        if tape.n != self.n || tape.flavor != self.flavor {
            return Err(Error::TapeMismatch {
                detail: "tape was recorded by a different cascade",
            });
        }
        if tape.stage_inputs.len() != self.stages.len() {
            return Err(Error::TapeMismatch {
                detail: "stage count differs",
            });
        }
        if g_out.len() != self.n {
            return Err(Error::DimMismatch {
                context: "Cascade::vjp",
                expected: self.n,
                actual: g_out.len(),
            });
        }
        let mut grads = vec![0.0; self.parameter_count()];
        let offsets = self.param_offsets();
        let mut g = g_out.clone();
        for (idx, stage) in self.stages.iter().enumerate().rev() {
            let len = stage.trainable_len(self.n);
            if len > 0 {
                let off = offsets[idx];
                stage.vjp_params(&tape.stage_inputs[idx], &g, &mut grads[off..off + len]);
            }
            g = stage.vjp_input(&g)?;
        }
        Ok((g, grads))
    }

    fn param_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.stages.len());
        let mut off = 0;
        for stage in &self.stages {
            offsets.push(off);
            off += stage.trainable_len(self.n);
        }
        offsets
    }

    /// Copy trainable parameters out in canonical order.
    pub fn get_params(&self, out: &mut [f64]) {
        assert_eq!(out.len(), self.parameter_count());
        let mut off = 0;
        for stage in &self.stages {
            match stage {
                Stage::UnitaryDiag(d) => {
                    out[off..off + self.n].copy_from_slice(d.theta());
                    off += self.n;
                }
                Stage::FreeDiag(d) => {
                    let (re, im) = d.entries();
                    out[off..off + self.n].copy_from_slice(re);
                    out[off + self.n..off + 2 * self.n].copy_from_slice(im);
                    off += 2 * self.n;
                }
                Stage::Reflect(r) => {
                    let (vr, vi) = r.v();
                    out[off..off + self.n].copy_from_slice(vr);
                    out[off + self.n..off + 2 * self.n].copy_from_slice(vi);
                    off += 2 * self.n;
                }
                Stage::Fourier(_) | Stage::Permute(_) => {}
            }
        }
    }

    /// Write trainable parameters back in canonical order. Reflectors that
    /// collapsed below the degeneracy floor are repaired in place.
    pub fn set_params(&mut self, src: &[f64]) {
        assert_eq!(src.len(), self.parameter_count());
        let n = self.n;
        let mut off = 0;
        for stage in &mut self.stages {
            match stage {
                Stage::UnitaryDiag(d) => {
                    d.theta_mut().copy_from_slice(&src[off..off + n]);
                    off += n;
                }
                Stage::FreeDiag(d) => {
                    let (re, im) = d.entries_mut();
                    re.copy_from_slice(&src[off..off + n]);
                    im.copy_from_slice(&src[off + n..off + 2 * n]);
                    off += 2 * n;
                }
                Stage::Reflect(r) => {
                    {
                        let (vr, vi) = r.v_mut();
                        vr.copy_from_slice(&src[off..off + n]);
                        vi.copy_from_slice(&src[off + n..off + 2 * n]);
                    }
                    r.repair_if_degenerate();
                    off += 2 * n;
                }
                Stage::Fourier(_) | Stage::Permute(_) => {}
            }
        }
    }

    /// Realized complex entries of the three diagonal stages, in order.
    pub fn diagonal_entries(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        self.stages
            .iter()
            .filter_map(|s| match s {
                Stage::UnitaryDiag(d) => Some(d.entries()),
                Stage::FreeDiag(d) => {
                    let (re, im) = d.entries();
                    Some((re.to_vec(), im.to_vec()))
                }
                _ => None,
            })
            .collect()
    }

    /// L2 norm of the first diagonal's angles, wrapped to (-pi, pi].
    pub fn angle_norm_first_diagonal(&self) -> f64 {
        let angles: Vec<f64> = match &self.stages[0] {
            Stage::UnitaryDiag(d) => d.theta().iter().map(|&t| wrap_angle(t)).collect(),
            Stage::FreeDiag(d) => {
                let (re, im) = d.entries();
                (0..self.n).map(|i| im[i].atan2(re[i])).collect()
            }
            _ => unreachable!("first stage is always a diagonal"),
        };
        angles.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// Product over the three diagonals of their largest entry modulus.
    /// Upper bound on the cascade operator norm (the other stages are
    /// unitary).
    pub fn diagonal_gain_bound(&self) -> f64 {
        self.stages
            .iter()
            .map(|s| match s {
                Stage::UnitaryDiag(_) => 1.0,
                Stage::FreeDiag(d) => d.max_modulus(),
                _ => 1.0,
            })
            .product()
    }

    /// Materialize the cascade as a dense N x N complex matrix by applying
    /// it to every basis vector. Column j of the result is cascade(e_j).
    /// Exposed for oracle tests and diagnostics; O(N^2 log N).
    pub fn to_dense(&self) -> Result<DenseMatrixParts> {
        let n = self.n;
        let mut col_re = vec![vec![0.0; n]; n];
        let mut col_im = vec![vec![0.0; n]; n];
        for j in 0..n {
            let y = self.apply(&ComplexVector::basis(n, j))?;
            for i in 0..n {
                col_re[i][j] = y.re[i];
                col_im[i][j] = y.im[i];
            }
        }
        Ok((col_re, col_im))
    }
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut w = theta.rem_euclid(two_pi);
    if w > PI {
        w -= two_pi;
    }
    w
}

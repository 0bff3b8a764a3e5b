//! Complex Householder reflection R = I - 2 v v* / ||v||^2.
//!
//! R is Hermitian and unitary (an involution), so its input cotangent rule
//! is another application of R itself. The ||v||^2 denominator is what
//! makes the involution exact; it is enforced here and checked by the
//! unitarity tests.

use crate::complex::ComplexVector;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Reflector norms below this are considered degenerate and repaired.
pub const DEGENERACY_FLOOR: f64 = 1e-12;
/// Norm assigned when a degenerate reflector is repaired.
pub const REPAIR_NORM: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct HouseholderReflector {
    v_re: Vec<f64>,
    v_im: Vec<f64>,
}

impl HouseholderReflector {
    pub fn new(v_re: Vec<f64>, v_im: Vec<f64>) -> Result<Self> {
        if v_re.len() != v_im.len() {
            return Err(Error::DimMismatch {
                context: "HouseholderReflector::new",
                expected: v_re.len(),
                actual: v_im.len(),
            });
        }
        let r = HouseholderReflector { v_re, v_im };
        if r.norm_sqr() == 0.0 {
            return Err(Error::ZeroReflector);
        }
        Ok(r)
    }

    pub fn random(n: usize, rng: &mut Rng) -> Self {
        let v_re = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let v_im = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
        // Uniform(-1,1)^2n draws are zero with probability zero; repair
        // anyway so the invariant holds unconditionally.
        let mut r = HouseholderReflector { v_re, v_im };
        r.repair_if_degenerate();
        r
    }

    pub fn n(&self) -> usize {
        self.v_re.len()
    }

    pub fn v(&self) -> (&[f64], &[f64]) {
        (&self.v_re, &self.v_im)
    }

    pub fn v_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.v_re, &mut self.v_im)
    }

    pub fn norm_sqr(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n() {
            acc += self.v_re[i] * self.v_re[i] + self.v_im[i] * self.v_im[i];
        }
        acc
    }

    /// Keep R well-defined after optimizer updates: if the norm collapses
    /// below the floor, rescale to a small fixed norm preserving direction
    /// (or reset to a basis direction if the vector is exactly zero).
    pub fn repair_if_degenerate(&mut self) {
        let norm = self.norm_sqr().sqrt();
        if norm >= DEGENERACY_FLOOR {
            return;
        }
        if norm == 0.0 {
            self.v_re[0] = REPAIR_NORM;
            return;
        }
        let scale = REPAIR_NORM / norm;
        for i in 0..self.n() {
            self.v_re[i] *= scale;
            self.v_im[i] *= scale;
        }
    }

    fn v_dot_conj(&self, x: &ComplexVector) -> (f64, f64) {
        // sum_i conj(v_i) x_i
        let mut re = 0.0;
        let mut im = 0.0;
        for i in 0..self.n() {
            re += self.v_re[i] * x.re[i] + self.v_im[i] * x.im[i];
            im += self.v_re[i] * x.im[i] - self.v_im[i] * x.re[i];
        }
        (re, im)
    }

    pub fn apply(&self, x: &ComplexVector) -> Result<ComplexVector> {
        if x.len() != self.n() {
            return Err(Error::DimMismatch {
                context: "HouseholderReflector::apply",
                expected: self.n(),
                actual: x.len(),
            });
        }
        let n2 = self.norm_sqr();
        let (s_re, s_im) = self.v_dot_conj(x);
        let a_re = 2.0 * s_re / n2;
        let a_im = 2.0 * s_im / n2;
        let mut out = x.clone();
        for i in 0..self.n() {
            out.re[i] -= a_re * self.v_re[i] - a_im * self.v_im[i];
            out.im[i] -= a_re * self.v_im[i] + a_im * self.v_re[i];
        }
        Ok(out)
    }

    /// R is Hermitian, so the input cotangent is R g.
    pub fn vjp_input(&self, g: &ComplexVector) -> ComplexVector {
        self.apply(g).expect("reflector and cotangent dims agree")
    }

    /// Gradients for the reflector components, laid out [d v_re; d v_im].
    ///
    /// With s = v* x, n2 = ||v||^2, a = 2 s / n2 and y = x - a v, the
    /// packed-cotangent product rules give
    ///   g_a  = -sum_i g_i conj(v_i)
    ///   g_s  = (2 / n2) g_a
    ///   g_n2 = Re(conj(g_a) * (-2 s / n2^2))
    ///   g_v_i = -g_i conj(a) + conj(g_s) x_i + 2 g_n2 v_i
    pub fn vjp_params(&self, x_in: &ComplexVector, g: &ComplexVector, out: &mut [f64]) {
        let n = self.n();
        debug_assert_eq!(out.len(), 2 * n);
        let n2 = self.norm_sqr();
        let (s_re, s_im) = self.v_dot_conj(x_in);
        let a_re = 2.0 * s_re / n2;
        let a_im = 2.0 * s_im / n2;

        // g_a = -sum_i g_i * conj(v_i)
        let mut ga_re = 0.0;
        let mut ga_im = 0.0;
        for i in 0..n {
            ga_re -= g.re[i] * self.v_re[i] + g.im[i] * self.v_im[i];
            ga_im -= g.im[i] * self.v_re[i] - g.re[i] * self.v_im[i];
        }

        let gs_re = 2.0 / n2 * ga_re;
        let gs_im = 2.0 / n2 * ga_im;
        // Re(conj(g_a) * s) * (-2 / n2^2)
        let gn2 = (ga_re * s_re + ga_im * s_im) * (-2.0 / (n2 * n2));

        for i in 0..n {
            // -g_i * conj(a)
            let mut gv_re = -(g.re[i] * a_re + g.im[i] * a_im);
            let mut gv_im = -(g.im[i] * a_re - g.re[i] * a_im);
            // + conj(g_s) * x_i
            gv_re += gs_re * x_in.re[i] + gs_im * x_in.im[i];
            gv_im += gs_re * x_in.im[i] - gs_im * x_in.re[i];
            // + 2 g_n2 v_i
            gv_re += 2.0 * gn2 * self.v_re[i];
            gv_im += 2.0 * gn2 * self.v_im[i];
            out[i] = gv_re;
            out[n + i] = gv_im;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_of_axis_is_negation() {
        let mut rng = Rng::new(3);
        let r = HouseholderReflector::random(6, &mut rng);
        let (vr, vi) = r.v();
        let x = ComplexVector::new(vr.to_vec(), vi.to_vec()).unwrap();
        let y = r.apply(&x).unwrap();
        for i in 0..6 {
            assert!((y.re[i] + x.re[i]).abs() < 1e-12);
            assert!((y.im[i] + x.im[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_complement_is_fixed() {
        // v = e_0, x with x_0 = 0 => v* x = 0 => R x = x.
        let r = HouseholderReflector::new(vec![1.0, 0.0, 0.0], vec![0.0; 3]).unwrap();
        let x = ComplexVector::new(vec![0.0, 2.0, -1.0], vec![0.0, 0.5, 3.0]).unwrap();
        let y = r.apply(&x).unwrap();
        assert!(y.max_abs_diff(&x) < 1e-15);
    }

    #[test]
    fn involution() {
        let mut rng = Rng::new(3);
        let r = HouseholderReflector::random(8, &mut rng);
        let x = ComplexVector::random(8, &mut rng);
        let twice = r.apply(&r.apply(&x).unwrap()).unwrap();
        assert!(twice.max_abs_diff(&x) < 1e-12);
    }

    #[test]
    fn norm_preserved() {
        let mut rng = Rng::new(31);
        for _ in 0..20 {
            let r = HouseholderReflector::random(16, &mut rng);
            let x = ComplexVector::random(16, &mut rng);
            let y = r.apply(&x).unwrap();
            assert!((y.norm() - x.norm()).abs() / x.norm() < 1e-10);
        }
    }

    #[test]
    fn zero_reflector_rejected() {
        let err = HouseholderReflector::new(vec![0.0; 4], vec![0.0; 4]).unwrap_err();
        assert_eq!(err, Error::ZeroReflector);
    }

    #[test]
    fn degenerate_repair_preserves_direction() {
        let mut r = HouseholderReflector::new(vec![3e-13, 4e-13], vec![0.0, 0.0]).unwrap();
        r.repair_if_degenerate();
        let norm = r.norm_sqr().sqrt();
        assert!((norm - REPAIR_NORM).abs() < 1e-18);
        let (vr, _) = r.v();
        assert!((vr[0] / vr[1] - 0.75).abs() < 1e-12);
    }
}

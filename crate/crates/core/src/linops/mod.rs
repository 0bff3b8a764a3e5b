//! Structured complex linear operators with forward, adjoint and analytic
//! parameter gradients, composed into the unitary and complex-evolution
//! cascades.

mod cascade;
mod diagonal;
mod fourier;
mod householder;
mod permutation;
mod truncation;

pub use cascade::{wrap_angle, Cascade, CascadeFlavor, CascadeTape, DenseMatrixParts, Stage};
pub use diagonal::{FreeDiagonal, UnitaryDiagonal};
pub use fourier::{apply_fourier, FftDirection, FourierOp};
pub use householder::{HouseholderReflector, DEGENERACY_FLOOR, REPAIR_NORM};
pub use permutation::PermutationOp;
pub use truncation::{truncate, truncate_adjoint, TruncationOp};

//! Recurrent cells with structured complex state-transition operators.
//!
//! The transition matrix of a plain RNN is replaced by a fixed cascade of
//! cheap complex linear operators: unitary (or unconstrained) diagonals,
//! Householder reflections, a frozen permutation and a unitary FFT pair.
//! The unitary flavor keeps the whole cascade norm-preserving; the
//! complex-evolution flavor drops the modulus constraint on the diagonals
//! and is a strict superset of the unitary family.
//!
//! The crate is self-contained: hand-written reverse-mode gradients for
//! every operator and cell, an Adam optimizer over flattened parameter
//! blocks, deterministic task generators (multivariate regression, copy
//! memory) and a training loop with metric capture. Everything is
//! reproducible bit-for-bit from a seed when run single-threaded.

#![allow(clippy::needless_range_loop)]

pub mod activations;
pub mod cells;
pub mod complex;
pub mod error;
pub mod linops;
pub mod models;
pub mod rng;
pub mod tasks;
pub mod training;

pub use complex::ComplexVector;
pub use error::Error;
pub use rng::Rng;

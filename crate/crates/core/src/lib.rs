//! Numerical laboratory for the excitation spectrum of the mean-field Bose gas.
//!
//! The crate is `no_std` with `alloc`. It builds the Hartree condensate on a
//! one-dimensional grid, expands the excitation Hamiltonian
//!
//! ```text
//! H = K0 + (N-1)^-1 [ K1 a(N) + (K2 b(N) + h.c.) + (K3 c(N) + h.c.) + K4 ]
//! ```
//!
//! in a truncated bosonic Fock space over the lowest excitation modes, finds
//! its ground state, and analyses the number distribution `P(l)` of
//! excitations: windowed difference inequalities, convexity envelopes, decay
//! fits and randomized checks of the operator bounds that drive the decay.
//!
//! File formats, configuration and the command line live in the companion
//! `bosegas-lab` crate.

#![no_std]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod decay;
pub mod error;
pub mod fock;
pub mod grid;
pub mod hamiltonian;
pub mod hartree;
pub mod lemmas;
pub mod potentials;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};

pub use nalgebra::{Complex, DMatrix};

/// `r * exp(i theta)`; the `no_std` build of `Complex` lacks float methods.
pub(crate) fn polar(r: f64, theta: f64) -> Complex<f64> {
    Complex::new(r * libm::cos(theta), r * libm::sin(theta))
}

pub(crate) fn modulus(z: Complex<f64>) -> f64 {
    libm::hypot(z.re, z.im)
}

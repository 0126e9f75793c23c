//! Floquet engineering of GKP grid states in a periodically kicked oscillator.
//!
//! A harmonic mode `ω₀n̂` driven by `−J f(t) cos(2√πηx̂)`, with `f` a comb of
//! `N` harmonics of `4ω₀`, has a one-period propagator close to
//! `exp(−iT·Ĥ_GKP)`. Its Floquet states are finite-energy GKP codewords.
//! Sweeping the drive into resonance prepares them from the vacuum.
//!
//! - [`fock`]: truncated Fock space, ladder and displacement operators.
//! - [`model`]: model parameters and the driven Hamiltonian.
//! - [`floquet`]: one-period propagators and the Floquet GKP pair.
//! - [`metrics`]: stabilizers, squeezing, the ideal decoder, Wigner functions.
//! - [`prep`] and [`split`]: adiabatic preparation in the time domain.
//! - [`noise`]: photon-loss trajectories and flux noise on the drive.
//!
//! Dense products go through OpenBLAS. Some OpenBLAS builds return wrong
//! DGEMM results with the SkylakeX kernel; run [`linalg::blas_self_test`]
//! once, or set `OPENBLAS_CORETYPE=Haswell`.

// `!(x > 0.0)` is the NaN-rejecting comparison; the index loops walk several arrays at once.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod floquet;
pub mod fock;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod noise;
pub mod prep;
pub mod split;
pub mod workbench;

pub use error::{Error, Result};

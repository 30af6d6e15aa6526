//! Semiclassical dynamics in periodic potentials.
//!
//! The crate builds the full pipeline needed to compare quantum and
//! semiclassical transport for an isolated Bloch band:
//!
//! * plane-wave Bloch band structure ([`bloch`]),
//! * gauge-invariant band geometry: Berry curvature, magnetic moment,
//!   Chern numbers, plus a discrete magnetic tight-binding model
//!   ([`geometry`], [`hofstadter`]),
//! * the corrected semiclassical flow in its noncanonical Hamiltonian
//!   form ([`flow`]),
//! * wave packets, Wigner transforms and lattice-periodic observables
//!   ([`wavefield`], [`wavepacket`], [`wigner`], [`observable`]),
//! * a split-step spectral reference solver ([`schrodinger`]),
//! * and the convergence harness tying everything together ([`egorov`]).

pub mod bloch;
pub mod fields;
pub mod flow;
pub mod error;
pub mod fftutil;
pub mod geometry;
pub mod hofstadter;
pub mod interp;
pub mod lattice;
pub mod planewave;
pub mod observable;
pub mod potential;
pub mod schrodinger;
pub mod wavefield;
pub mod wigner;
pub mod wavepacket;

pub use error::{Error, Result};

//! Bloch-orbital UPAW Hamiltonians for fault-tolerant resource estimation.
//!
//! The crate takes a [`dataset::BlochDataset`] (one-body integrals, smooth
//! density Fourier coefficients, projector overlaps and on-site Coulomb
//! tensors on a k-point mesh) and produces:
//!
//! * the two-body integrals and the renormalized one-body kernel ([`hamiltonian`]),
//! * the linear-combination-of-unitaries factorization ([`lcu`]),
//! * its one-norm ([`norm`]),
//! * Toffoli and logical-qubit counts for a qubitization walk ([`resources`]),
//! * brute-force Fock-space reference Hamiltonians ([`fock`]),
//! * synthetic scaling series with power-law fits ([`bench`]).
//!
//! Everything here is `no_std` with `alloc`; file formats and the command
//! line live in the companion `blochpaw` crate.
#![cfg_attr(not(test), no_std)]
#![deny(missing_docs)]

extern crate alloc;

pub mod bench;
pub mod dataset;
pub mod error;
pub mod fock;
pub mod hamiltonian;
pub mod kspace;
pub mod lcu;
pub mod linalg;
pub mod norm;
pub mod resources;

pub use error::Error;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;

/// One milli-electronvolt in Hartree.
pub const MEV_IN_HARTREE: f64 = 3.674_932_2e-5;

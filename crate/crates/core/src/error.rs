//! Error type shared by every module.

use alloc::string::String;
use core::fmt;

/// Failure modes of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An index or size is out of range or inconsistent.
    Validation(String),
    /// An array does not have the shape implied by the mesh and band counts.
    DimensionMismatch {
        /// Array path, e.g. `density_fourier[0][1]`.
        path: String,
        /// Expected length.
        expected: usize,
        /// Length found.
        found: usize,
    },
    /// A matrix that must be Hermitian is not.
    NotHermitian {
        /// Array path of the offending matrix.
        path: String,
        /// Largest |A - A^H| entry.
        residual: f64,
    },
    /// A tabulated kernel was requested but no table entry exists.
    MissingKernel {
        /// Index into `g_list`.
        g: usize,
        /// Flat momentum-transfer index.
        q: usize,
    },
    /// The requested Fock space is larger than the dense oracle accepts.
    SizeCap {
        /// Spin orbitals requested.
        spin_orbitals: usize,
        /// Largest accepted.
        cap: usize,
    },
    /// A numeric parameter is outside its domain.
    InvalidParameter(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Validation(m) => write!(f, "validation error: {m}"),
            Error::DimensionMismatch { path, expected, found } => {
                write!(f, "dimension mismatch at {path}: expected {expected}, found {found}")
            }
            Error::NotHermitian { path, residual } => {
                write!(f, "Hermiticity violation at {path} (residual {residual:.3e})")
            }
            Error::MissingKernel { g, q } => write!(f, "missing kernel table entry for G #{g}, Q #{q}"),
            Error::SizeCap { spin_orbitals, cap } => write!(
                f,
                "{spin_orbitals} spin orbitals exceed the dense Fock oracle cap of {cap}"
            ),
            Error::InvalidParameter(m) => write!(f, "invalid parameter: {m}"),
        }
    }
}

impl core::error::Error for Error {}

//! Simulation of a Kerr parametric oscillator probed by microwave reflection:
//! Fock-space primitives, the driven spectrum, Lindblad evolution, the
//! reflection coefficient and single-qubit state tomography built on it.

pub mod error;
pub mod fockspace;
pub mod lindblad;
pub mod model;
pub mod reflection;
pub mod tomography;

pub use error::{KpoError, Result};
pub use fockspace::{DensityMatrix, OperatorMatrix, StateVector, C64};
pub use model::{KpoParams, Spectrum};

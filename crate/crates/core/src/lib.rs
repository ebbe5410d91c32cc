//! Closed-form control of the NV⁻ ground-state triplet through an effective
//! Raman coupling (NV-ERC): pulse unitaries, double-quantum rotations, gate
//! synthesis, strain compensation and an independent numerical propagator.
//!
//! All frequencies are angular frequencies. Matrices and state vectors use
//! the ordered basis `(|+1⟩, |0⟩, |−1⟩)`.

pub mod calibration;
pub mod erc;
pub mod error;
pub mod propagator;
pub mod sequence;
pub mod spin;
pub mod strain;
pub mod synth;

pub use error::{Error, Result};
pub use nalgebra::Complex;

/// Complex double used throughout the crate.
pub type C64 = Complex<f64>;
/// 3×3 complex matrix in the `(|+1⟩, |0⟩, |−1⟩)` basis.
pub type Mat3 = nalgebra::Matrix3<C64>;
/// 2×2 complex matrix on the double-quantum subspace `(|+1⟩, |−1⟩)`.
pub type Mat2 = nalgebra::Matrix2<C64>;
/// Complex 3-vector in the `(|+1⟩, |0⟩, |−1⟩)` basis.
pub type Vec3 = nalgebra::Vector3<C64>;

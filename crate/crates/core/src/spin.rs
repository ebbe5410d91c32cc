//! Value types shared by every other module: physical parameters, spin-1
//! operators, three-level states and unitaries, and the double-quantum (DQ)
//! Bloch sphere spanned by `|+1⟩` and `|−1⟩`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Mat2, Mat3, Vec3, C64};

pub const IDX_PLUS1: usize = 0;
pub const IDX_ZERO: usize = 1;
pub const IDX_MINUS1: usize = 2;

/// Static physical parameters, all as angular frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Zero-field splitting.
    pub d: f64,
    /// Zeeman splitting μB.
    pub mu_b: f64,
    /// Amplitude of the x drive.
    pub omega_x: f64,
    /// Amplitude of the orthogonal y drive.
    #[serde(default)]
    pub omega_y: f64,
    #[serde(default)]
    pub ex: f64,
    #[serde(default)]
    pub ey: f64,
    #[serde(default)]
    pub ez: f64,
}

impl SystemParams {
    pub fn new(d: f64, mu_b: f64, omega_x: f64) -> Self {
        Self { d, mu_b, omega_x, omega_y: 0.0, ex: 0.0, ey: 0.0, ez: 0.0 }
    }

    /// Dimensionless reproduction setup: μB = 1, drive `omega` in units of μB.
    pub fn reduced(omega: f64) -> Self {
        Self::new(500.0, 1.0, omega)
    }

    pub fn with_omega_y(mut self, omega_y: f64) -> Self {
        self.omega_y = omega_y;
        self
    }

    pub fn with_fields(mut self, ex: f64, ey: f64, ez: f64) -> Self {
        self.ex = ex;
        self.ey = ey;
        self.ez = ez;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.d, self.mu_b, self.omega_x, self.omega_y, self.ex, self.ey, self.ez];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("system parameters must be finite".into()));
        }
        if self.d <= 0.0 {
            return Err(Error::InvalidInput(format!("D must be positive, got {}", self.d)));
        }
        if self.mu_b < 0.0 {
            return Err(Error::InvalidInput(format!("muB must be >= 0, got {}", self.mu_b)));
        }
        Ok(())
    }

    /// Drive carrier frequency, D + E_z.
    pub fn carrier(&self) -> f64 {
        self.d + self.ez
    }

    /// √(μ²B² + E_y² + E_x²).
    pub fn mu_b_eff(&self) -> f64 {
        (self.mu_b * self.mu_b + self.ey * self.ey + self.ex * self.ex).sqrt()
    }

    /// √(Ω_x² + Ω_y²).
    pub fn omega_eff(&self) -> f64 {
        self.omega_x.hypot(self.omega_y)
    }

    /// True when the closed forms are defined: Ω_eff ≥ 2·μB_eff.
    pub fn in_erc_regime(&self) -> bool {
        self.omega_eff() >= 2.0 * self.mu_b_eff()
    }

    pub fn check_regime(&self) -> Result<()> {
        if self.in_erc_regime() {
            Ok(())
        } else {
            Err(Error::Regime {
                omega: self.omega_eff(),
                mu_b: self.mu_b_eff(),
                min_omega: 2.0 * self.mu_b_eff(),
            })
        }
    }
}

/// Picture in which a state or propagator is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    #[serde(rename = "lab")]
    Lab,
    /// Interaction picture with respect to D·S_z².
    #[serde(rename = "interaction-D")]
    InteractionD,
    /// Interaction picture with respect to (D + E_z)·S_z².
    #[serde(rename = "interaction-D-plus-Ez")]
    InteractionDPlusEz,
}

impl Frame {
    /// Frequency multiplying S_z² in the reference Hamiltonian of this frame.
    pub fn reference_frequency(self, p: &SystemParams) -> f64 {
        match self {
            Frame::Lab => 0.0,
            Frame::InteractionD => p.d,
            Frame::InteractionDPlusEz => p.d + p.ez,
        }
    }

    /// The rotating frame in which the RWA Hamiltonians are time independent.
    pub fn carrier_frame(p: &SystemParams) -> Frame {
        if p.ez == 0.0 {
            Frame::InteractionD
        } else {
            Frame::InteractionDPlusEz
        }
    }
}

/// Normalized pure state of the triplet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector3 {
    amps: Vec3,
}

impl StateVector3 {
    /// Normalizes `amps`; fails on a zero or non-finite vector.
    pub fn new(amps: Vec3) -> Result<Self> {
        let n = amps.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::InvalidInput("state vector has zero or non-finite norm".into()));
        }
        Ok(Self { amps: amps / C64::from(n) })
    }

    /// Wraps amplitudes that are already unit norm (e.g. the image of a unitary).
    pub(crate) fn from_unit(amps: Vec3) -> Self {
        Self { amps }
    }

    pub fn basis(idx: usize) -> Self {
        let mut amps = Vec3::zeros();
        amps[idx] = C64::new(1.0, 0.0);
        Self { amps }
    }

    pub fn plus1() -> Self {
        Self::basis(IDX_PLUS1)
    }

    pub fn zero() -> Self {
        Self::basis(IDX_ZERO)
    }

    pub fn minus1() -> Self {
        Self::basis(IDX_MINUS1)
    }

    /// |+⟩ = (|+1⟩ + |−1⟩)/√2
    pub fn plus() -> Self {
        Self { amps: ket_plus() }
    }

    /// |−⟩ = (|+1⟩ − |−1⟩)/√2
    pub fn minus() -> Self {
        Self { amps: ket_minus() }
    }

    pub fn amps(&self) -> &Vec3 {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// ⟨self|other⟩
    pub fn overlap(&self, other: &StateVector3) -> C64 {
        self.amps.dotc(&other.amps)
    }

    /// Phase-insensitive fidelity |⟨self|other⟩|.
    pub fn fidelity(&self, other: &StateVector3) -> f64 {
        self.overlap(other).norm()
    }

    /// Populations (p₊₁, p₀, p₋₁).
    pub fn populations(&self) -> [f64; 3] {
        [self.amps[0].norm_sqr(), self.amps[1].norm_sqr(), self.amps[2].norm_sqr()]
    }
}

/// 3×3 evolution operator tagged with the frame it is expressed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary3 {
    pub m: Mat3,
    pub frame: Frame,
}

impl Unitary3 {
    pub fn new(m: Mat3, frame: Frame) -> Self {
        Self { m, frame }
    }

    pub fn identity(frame: Frame) -> Self {
        Self { m: Mat3::identity(), frame }
    }

    pub fn apply(&self, s: &StateVector3) -> StateVector3 {
        StateVector3::from_unit(self.m * s.amps)
    }

    /// `self · other`, i.e. `other` acts first.
    pub fn then_after(&self, other: &Unitary3) -> Unitary3 {
        Unitary3 { m: self.m * other.m, frame: self.frame }
    }

    pub fn dagger(&self) -> Unitary3 {
        Unitary3 { m: self.m.adjoint(), frame: self.frame }
    }

    /// ‖U†U − I‖ in operator norm.
    pub fn unitarity_defect(&self) -> f64 {
        operator_norm(&(self.m.adjoint() * self.m - Mat3::identity()))
    }

    pub fn distance(&self, other: &Unitary3) -> f64 {
        operator_norm(&(self.m - other.m))
    }

    /// |tr(U†V)|/3
    pub fn fidelity(&self, other: &Unitary3) -> f64 {
        (self.m.adjoint() * other.m).trace().norm() / 3.0
    }

    /// Restriction to span{|+1⟩, |−1⟩}.
    pub fn dq_block(&self) -> Mat2 {
        dq_block(&self.m)
    }

    /// |tr(A†B)|/2 on the DQ blocks.
    pub fn dq_fidelity(&self, other: &Unitary3) -> f64 {
        dq_fidelity(&self.dq_block(), &other.dq_block())
    }

    /// Largest population transferred between |0⟩ and the DQ subspace.
    pub fn leakage(&self) -> f64 {
        let m = &self.m;
        [m[(IDX_ZERO, IDX_PLUS1)], m[(IDX_ZERO, IDX_MINUS1)], m[(IDX_PLUS1, IDX_ZERO)], m[(IDX_MINUS1, IDX_ZERO)]]
            .iter()
            .map(|z| z.norm_sqr())
            .fold(0.0, f64::max)
    }
}

pub fn dq_block(m: &Mat3) -> Mat2 {
    Mat2::new(
        m[(IDX_PLUS1, IDX_PLUS1)],
        m[(IDX_PLUS1, IDX_MINUS1)],
        m[(IDX_MINUS1, IDX_PLUS1)],
        m[(IDX_MINUS1, IDX_MINUS1)],
    )
}

pub fn dq_fidelity(a: &Mat2, b: &Mat2) -> f64 {
    (a.adjoint() * b).trace().norm() / 2.0
}

/// Spectral norm (largest singular value).
pub fn operator_norm(m: &Mat3) -> f64 {
    m.singular_values().max()
}

/// |a⟩⟨b|
pub fn outer(a: &Vec3, b: &Vec3) -> Mat3 {
    a * b.adjoint()
}

pub(crate) fn ket_plus() -> Vec3 {
    Vector3::new(C64::from(FRAC_1_SQRT_2), C64::from(0.0), C64::from(FRAC_1_SQRT_2))
}

pub(crate) fn ket_minus() -> Vec3 {
    Vector3::new(C64::from(FRAC_1_SQRT_2), C64::from(0.0), C64::from(-FRAC_1_SQRT_2))
}

pub(crate) fn ket(idx: usize) -> Vec3 {
    StateVector3::basis(idx).amps
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinMatrices {
    pub x: Mat3,
    pub y: Mat3,
    pub z: Mat3,
}

/// Spin-1 matrices in the `(|+1⟩, |0⟩, |−1⟩)` basis.
pub fn spin_matrices() -> SpinMatrices {
    let r = C64::from(FRAC_1_SQRT_2);
    let o = C64::from(0.0);
    let i = C64::new(0.0, FRAC_1_SQRT_2);
    let x = Matrix3::new(o, r, o, r, o, r, o, r, o);
    let y = Matrix3::new(o, -i, o, i, o, -i, o, i, o);
    let z = Matrix3::from_diagonal(&Vector3::new(C64::from(1.0), o, C64::from(-1.0)));
    SpinMatrices { x, y, z }
}

/// Equatorial DQ state (−e^{iϑ/2}|+1⟩ + e^{−iϑ/2}|−1⟩)/√2.
///
/// `label` and `label + π` are orthogonal; the Bloch azimuth of the state is
/// `π − label`.
pub fn phi_state(label: f64) -> StateVector3 {
    let h = 0.5 * label;
    let a = -C64::from_polar(FRAC_1_SQRT_2, h);
    let b = C64::from_polar(FRAC_1_SQRT_2, -h);
    StateVector3 { amps: Vector3::new(a, C64::from(0.0), b) }
}

/// Point on the DQ Bloch sphere with `|+1⟩` as north pole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DQBlochPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Population left on |0⟩.
    pub leak: f64,
}

impl DQBlochPoint {
    /// Azimuth in [0, 2π).
    pub fn azimuth(&self) -> f64 {
        self.y.atan2(self.x).rem_euclid(2.0 * PI)
    }

    pub fn radius(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

pub fn dq_projection(s: &StateVector3) -> DQBlochPoint {
    let a = s.amps[IDX_PLUS1];
    let b = s.amps[IDX_MINUS1];
    let c = a.conj() * b;
    DQBlochPoint {
        x: 2.0 * c.re,
        y: 2.0 * c.im,
        z: a.norm_sqr() - b.norm_sqr(),
        leak: s.amps[IDX_ZERO].norm_sqr(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn commutator(a: &Mat3, b: &Mat3) -> Mat3 {
        a * b - b * a
    }

    #[test]
    fn spin_algebra() {
        let s = spin_matrices();
        let i = C64::new(0.0, 1.0);
        assert!(operator_norm(&(commutator(&s.x, &s.y) - s.z * i)) < 1e-14);
        assert!(operator_norm(&(commutator(&s.y, &s.z) - s.x * i)) < 1e-14);
        assert!(operator_norm(&(commutator(&s.z, &s.x) - s.y * i)) < 1e-14);
        let sz2 = s.z * s.z;
        assert_eq!(sz2[(0, 0)].re, 1.0);
        assert_eq!(sz2[(1, 1)].re, 0.0);
        assert_eq!(sz2[(2, 2)].re, 1.0);
        // S² = s(s+1) = 2
        let total = s.x * s.x + s.y * s.y + sz2;
        assert!(operator_norm(&(total - Mat3::identity() * C64::from(2.0))) < 1e-14);
    }

    #[test]
    fn quadrupolar_term_splits_zero_from_dq() {
        let s = spin_matrices();
        let d = 2.87;
        let h = s.z * s.z * C64::from(d);
        let ev = h.symmetric_eigenvalues();
        let mut ev: Vec<f64> = ev.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0]).abs() < 1e-14);
        assert!((ev[1] - d).abs() < 1e-14 && (ev[2] - d).abs() < 1e-14);
    }

    #[test]
    fn plus_minus_basis() {
        let p = StateVector3::plus();
        let m = StateVector3::minus();
        assert!(p.overlap(&m).norm() < 1e-14);
        assert!((p.overlap(&p).re - 1.0).abs() < 1e-14);
        assert!((m.overlap(&m).re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn phi_state_zero_is_minus_ket() {
        let s = phi_state(0.0);
        let target = -ket_minus();
        assert!((s.amps - target).norm() < 1e-15);
        assert_eq!(s.amps[IDX_ZERO], C64::from(0.0));
    }

    #[test]
    fn antipodal_phi_states_are_orthonormal() {
        for k in 0..100 {
            let phi = 2.0 * PI * k as f64 / 100.0;
            let a = phi_state(phi);
            let b = phi_state(phi + PI);
            assert!(a.overlap(&b).norm() < 1e-14);
            assert!((a.norm() - 1.0).abs() < 1e-14);
            // together with |0⟩ they span the space
            let proj = outer(&a.amps, &a.amps) + outer(&b.amps, &b.amps) + outer(&ket(1), &ket(1));
            assert!(operator_norm(&(proj - Mat3::identity())) < 1e-14);
        }
    }

    #[test]
    fn dq_projection_poles_and_equator() {
        let p = dq_projection(&StateVector3::plus1());
        assert_eq!((p.x, p.y, p.z, p.leak), (0.0, 0.0, 1.0, 0.0));
        let z = dq_projection(&StateVector3::zero());
        assert_eq!((z.x, z.y, z.z, z.leak), (0.0, 0.0, 0.0, 1.0));
        for k in 0..16 {
            let label = 0.37 * k as f64;
            let s = phi_state(label);
            let b = dq_projection(&s);
            // direct expectation values of the DQ Pauli operators
            let a1 = s.amps[0];
            let a2 = s.amps[2];
            let sx = (a1.conj() * a2 + a2.conj() * a1).re;
            let sy = (C64::new(0.0, -1.0) * a1.conj() * a2 + C64::new(0.0, 1.0) * a2.conj() * a1).re;
            assert!((b.x - sx).abs() < 1e-14);
            assert!((b.y - sy).abs() < 1e-14);
            assert!(b.z.abs() < 1e-14 && b.leak == 0.0);
            let expected = (PI - label).rem_euclid(2.0 * PI);
            let diff = (b.azimuth() - expected).rem_euclid(2.0 * PI);
            assert!(diff < 1e-12 || 2.0 * PI - diff < 1e-12, "label {label}");
        }
    }

    #[test]
    fn state_constructor_normalizes() {
        let s = StateVector3::new(Vector3::new(C64::new(3.0, 0.0), C64::new(0.0, 4.0), C64::from(0.0))).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-15);
        assert!(StateVector3::new(Vec3::zeros()).is_err());
    }

    #[test]
    fn params_validation_and_regime() {
        assert!(SystemParams::new(0.0, 1.0, 3.0).validate().is_err());
        assert!(SystemParams::new(1.0, -1.0, 3.0).validate().is_err());
        assert!(SystemParams::new(1.0, 1.0, f64::NAN).validate().is_err());
        assert!(SystemParams::reduced(3.0).check_regime().is_ok());
        match SystemParams::reduced(1.5).check_regime() {
            Err(Error::Regime { min_omega, .. }) => assert_eq!(min_omega, 2.0),
            other => panic!("{other:?}"),
        }
    }
}

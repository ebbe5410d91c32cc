//! Strain and electric-field generalization.
//!
//! E_z only moves the carrier. E_y enhances the effective Zeeman term and
//! rotates the DQ frame. E_x breaks the Raman resonance unless an orthogonal
//! y drive with the compensation ratio is added. In every resonant case the
//! rotating-frame Hamiltonian is the plain Raman form with effective rates in
//! a rotated DQ basis, so the closed forms of [`crate::erc`] apply unchanged.

use std::f64::consts::PI;

use serde::Serialize;

use crate::erc::{raman_unitary, ErcQuantities};
use crate::error::{Error, Result};
use crate::spin::{ket, ket_minus, ket_plus, outer, Frame, SystemParams, Unitary3, IDX_ZERO};
use crate::{Mat2, Mat3, Vec3, C64};

/// Resonance tolerance on ⟨b|M|b⟩ relative to the DQ coupling scale.
pub const RESONANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveParams {
    /// √(μ²B² + E_y² + E_x²)
    pub mu_b_eff: f64,
    /// √(Ω_x² + Ω_y²)
    pub omega_eff: f64,
    /// arctan(√(E_y² + E_x²)/μB): tilt of the DQ frame about its x axis.
    pub dq_frame_rotation: f64,
    /// D + E_z
    pub carrier: f64,
    /// Maps |+⟩, |−⟩ onto the rotated DQ basis; identity on |0⟩.
    #[serde(skip)]
    frame: Mat3,
    #[serde(skip)]
    rwa_frame: Frame,
}

impl EffectiveParams {
    pub fn quantities(&self) -> Result<ErcQuantities> {
        ErcQuantities::from_rates(self.mu_b_eff, self.omega_eff)
    }

    /// Basis change W with H_rwa = W·H′(μB_eff, Ω_eff)·W†.
    pub fn frame_unitary(&self) -> Mat3 {
        self.frame
    }

    /// Pulse unitary W·U(t, α)·W† in the carrier frame.
    pub fn erc_unitary(&self, t: f64, alpha: f64) -> Unitary3 {
        let u = raman_unitary(self.mu_b_eff, self.omega_eff, t, alpha);
        Unitary3::new(self.frame * u * self.frame.adjoint(), self.rwa_frame)
    }
}

/// Characteristic times with the E_y-enhanced Zeeman term (E_x ignored).
///
/// Fails with a regime error carrying the minimal drive 2·√(μ²B² + E_y²).
pub fn ey_characteristics(p: &SystemParams) -> Result<ErcQuantities> {
    ErcQuantities::from_rates(p.mu_b.hypot(p.ey), p.omega_x)
}

/// Largest |E_y| for which drive `omega_x` still depletes |0⟩.
pub fn ey_validity_boundary(mu_b: f64, omega_x: f64) -> Option<f64> {
    let v = 0.25 * omega_x * omega_x - mu_b * mu_b;
    (v >= 0.0).then(|| v.sqrt())
}

/// φ from the measured depletion time and period.
pub fn phi_from_times(t_prime: f64, t_total: f64) -> Result<f64> {
    if !(t_prime.is_finite() && t_total.is_finite() && t_total > 0.0) {
        return Err(Error::Domain(format!("invalid times T'={t_prime}, T={t_total}")));
    }
    let ratio = t_prime / t_total;
    const SLACK: f64 = 1e-12;
    // cos(2πρ) is symmetric about ρ = 1/2; physical depletion times give
    // ρ ∈ [1/4, 1/2], the mirrored band [1/2, 3/4] is accepted as well.
    if ratio < 0.25 - SLACK || ratio > 0.75 + SLACK {
        return Err(Error::Domain(format!("T'/T = {ratio} outside [1/4, 3/4]")));
    }
    let c = -(2.0 * PI * ratio).cos();
    Ok(c.clamp(0.0, 1.0).sqrt().acos())
}

/// Ω_y/Ω_x restoring the Raman resonance, with sign(0) = +1.
pub fn compensation_ratio(ex: f64, ey: f64) -> Result<f64> {
    if ex == 0.0 || !ex.is_finite() || !ey.is_finite() {
        return Err(Error::Domain("compensation needs a finite, nonzero E_x".into()));
    }
    let q = ey / ex;
    let sign = if q >= 0.0 { 1.0 } else { -1.0 };
    // q − sign(q)·√(q² + 1) written without cancellation
    Ok(-sign / (q.abs() + (q * q + 1.0).sqrt()))
}

/// The DQ block of the rotating-frame Hamiltonian in the (|+⟩, |−⟩) basis.
fn dq_coupling(p: &SystemParams) -> Mat2 {
    let c = C64::new(p.mu_b, p.ey);
    Mat2::new(C64::from(p.ex), c.conj(), c, C64::from(-p.ex))
}

/// Effective rates and DQ frame for `p` with `beta = alpha`.
pub fn effective_params(p: &SystemParams) -> Result<EffectiveParams> {
    p.validate()?;
    let omega_eff = p.omega_eff();
    let mu_b_eff = p.mu_b_eff();
    let m = dq_coupling(p);
    // drive direction in (|+⟩, |−⟩) coordinates
    let b = if omega_eff > 0.0 {
        nalgebra::Vector2::new(C64::from(p.omega_x / omega_eff), C64::new(0.0, p.omega_y / omega_eff))
    } else {
        nalgebra::Vector2::new(C64::from(1.0), C64::from(0.0))
    };
    let mb = m * b;
    let detuning = b.dotc(&mb).re;
    let scale = mu_b_eff.max(f64::MIN_POSITIVE);
    if detuning.abs() > RESONANCE_TOL * scale.max(1.0) {
        let detail = match compensation_ratio(p.ex, p.ey) {
            Ok(r) if p.omega_x != 0.0 => format!("Omega_y/Omega_x = {}, resonance needs {r}", p.omega_y / p.omega_x),
            _ => "drive does not match the strain configuration".to_string(),
        };
        return Err(Error::Resonance { residual: detuning.abs() / scale, detail });
    }
    let c = if mu_b_eff > 0.0 {
        mb / C64::from(mu_b_eff)
    } else {
        nalgebra::Vector2::new(-b[1].conj(), b[0].conj())
    };
    let (plus, minus) = (ket_plus(), ket_minus());
    let tilde_plus: Vec3 = plus * b[0] + minus * b[1];
    let tilde_minus: Vec3 = plus * c[0] + minus * c[1];
    let zero = ket(IDX_ZERO);
    let frame = outer(&tilde_plus, &plus) + outer(&tilde_minus, &minus) + outer(&zero, &zero);
    Ok(EffectiveParams {
        mu_b_eff,
        omega_eff,
        dq_frame_rotation: p.ex.hypot(p.ey).atan2(p.mu_b),
        carrier: p.carrier(),
        frame,
        rwa_frame: Frame::carrier_frame(p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::erc::characteristic_quantities;
    use crate::propagator::hamiltonian_rwa;
    use crate::sequence::PulseSegment;
    use crate::spin::operator_norm;

    #[test]
    fn ey_zero_reduces_to_bare() {
        let p = SystemParams::reduced(3.0);
        assert_eq!(ey_characteristics(&p).unwrap(), characteristic_quantities(&p).unwrap());
    }

    #[test]
    fn ey_boundary() {
        let b = ey_validity_boundary(1.0, 3.0).unwrap();
        assert!((b - 5f64.sqrt() / 2.0).abs() < 1e-15);
        let p = SystemParams::reduced(3.0).with_fields(0.0, 1.0001 * b, 0.0);
        assert!(matches!(ey_characteristics(&p), Err(Error::Regime { .. })));
        let p = SystemParams::reduced(3.0).with_fields(0.0, 0.9999 * b, 0.0);
        assert!(ey_characteristics(&p).is_ok());
    }

    #[test]
    fn ey_period_monotone() {
        let mut last = f64::INFINITY;
        for k in 0..20 {
            let ey = k as f64 * 0.05;
            let q = ey_characteristics(&SystemParams::reduced(3.0).with_fields(0.0, ey, 0.0)).unwrap();
            assert!(q.t_total < last);
            last = q.t_total;
            // Eq. form: T(E_y) = 2π/√(Ω̄² + E_y²)
            let ob2 = 1.0 + 2.25;
            assert!((q.t_total - 2.0 * PI / (ob2 + ey * ey).sqrt()).abs() < 1e-13);
        }
    }

    #[test]
    fn phi_from_times_limits() {
        assert!(phi_from_times(0.5, 1.0).unwrap().abs() < 1e-7);
        assert!((phi_from_times(0.75, 1.0).unwrap() - PI / 2.0).abs() < 1e-7);
        assert!((phi_from_times(0.25, 1.0).unwrap() - PI / 2.0).abs() < 1e-7);
        assert!(matches!(phi_from_times(0.2, 1.0), Err(Error::Domain(_))));
        assert!(matches!(phi_from_times(0.8, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn phi_round_trip_with_ey() {
        let p = SystemParams::reduced(3.0).with_fields(0.0, 0.7, 0.0);
        let q = ey_characteristics(&p).unwrap();
        let phi = phi_from_times(q.t_prime, q.t_total).unwrap();
        assert!((phi - q.phi).abs() < 1e-10);
        assert!((phi.cos() - 2.0 * (1.0f64 + 0.49).sqrt() / 3.0).abs() < 1e-10);
    }

    #[test]
    fn compensation_ratio_values() {
        assert!((compensation_ratio(-0.7, 0.7).unwrap() - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((compensation_ratio(0.7, 0.7).unwrap() - (1.0 - 2f64.sqrt())).abs() < 1e-15);
        assert_eq!(compensation_ratio(0.5, 0.0).unwrap(), -1.0);
        assert!(matches!(compensation_ratio(0.0, 1.0), Err(Error::Domain(_))));
        // asymptote −sign(q)/(2|q|)
        let r = compensation_ratio(1e-3, 1.0).unwrap();
        assert!((r + 1.0 / 2000.0).abs() < 1e-9);
        let r = compensation_ratio(1e-3, -1.0).unwrap();
        assert!((r - 1.0 / 2000.0).abs() < 1e-9);
    }

    #[test]
    fn compensation_ratio_matches_literal_formula() {
        for &(ex, ey) in &[(0.3, 0.1), (-0.4, 0.9), (1.0, -2.0), (-0.2, -0.2)] {
            let q: f64 = ey / ex;
            let literal = q - q.signum() * (q * q + 1.0).sqrt();
            assert!((compensation_ratio(ex, ey).unwrap() - literal).abs() < 1e-14);
        }
    }

    #[test]
    fn bare_params_map_to_themselves() {
        let p = SystemParams::reduced(3.0);
        let e = effective_params(&p).unwrap();
        assert_eq!((e.mu_b_eff, e.omega_eff, e.carrier), (1.0, 3.0, 500.0));
        assert_eq!(e.dq_frame_rotation, 0.0);
        assert!(operator_norm(&(e.frame_unitary() - Mat3::identity())) < 1e-15);
    }

    #[test]
    fn effective_form_reproduces_rwa_hamiltonian() {
        let cases = [
            SystemParams::reduced(3.0).with_fields(0.0, 0.5, 0.0),
            {
                let p = SystemParams::reduced(4.5).with_fields(-0.7, 0.7, 0.2);
                p.with_omega_y(4.5 * compensation_ratio(-0.7, 0.7).unwrap())
            },
            {
                let p = SystemParams::reduced(5.0).with_fields(0.5, 0.0, 0.0);
                p.with_omega_y(-5.0)
            },
        ];
        for p in cases {
            let e = effective_params(&p).unwrap();
            for &a in &[0.0, 0.9] {
                let h = hamiltonian_rwa(&p, &PulseSegment::for_params(1.0, a, &p));
                let bare = SystemParams::new(p.d, e.mu_b_eff, e.omega_eff);
                let h0 = hamiltonian_rwa(&bare, &PulseSegment::new(1.0, a, e.omega_eff));
                let w = e.frame_unitary();
                assert!(operator_norm(&(w * h0 * w.adjoint() - h)) < 1e-12, "{p:?}");
                // spectra agree
                let mut s1: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
                let mut s2: Vec<f64> = h0.symmetric_eigenvalues().iter().copied().collect();
                s1.sort_by(f64::total_cmp);
                s2.sort_by(f64::total_cmp);
                for (x, y) in s1.iter().zip(&s2) {
                    assert!((x - y).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn uncompensated_ex_is_rejected() {
        let p = SystemParams::reduced(4.5).with_fields(-0.7, 0.7, 0.0).with_omega_y(4.5 * 0.3);
        match effective_params(&p) {
            Err(Error::Resonance { detail, .. }) => assert!(detail.contains("resonance needs")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn compensated_rotated_hamiltonian_has_no_dq_detuning() {
        let p = SystemParams::reduced(4.5).with_fields(-0.7, 0.7, 0.0);
        let p = p.with_omega_y(4.5 * compensation_ratio(-0.7, 0.7).unwrap());
        let e = effective_params(&p).unwrap();
        let h = hamiltonian_rwa(&p, &PulseSegment::for_params(1.0, 0.0, &p));
        let w = e.frame_unitary();
        let rotated = w.adjoint() * h * w;
        let (plus, minus) = (ket_plus(), ket_minus());
        assert!(plus.dotc(&(rotated * plus)).norm() < 1e-12);
        assert!(minus.dotc(&(rotated * minus)).norm() < 1e-12);
        assert!((minus.dotc(&(rotated * plus)) - C64::from(e.mu_b_eff)).norm() < 1e-12);
    }
}

//! Closed-form solution of the resonant Raman problem driven at the
//! zero-field splitting: characteristic times, the pulse unitary, the two
//! basis transformations at the depletion times and the two-pulse rotations
//! of the double-quantum (DQ) qubit.
//!
//! State labels: the depletion pulse maps `|0⟩` onto `phi_state(ϑ)` with
//! `ϑ = 2·arccos(2μB/Ω)`, twice the characteristic angle `φ` returned in
//! [`ErcQuantities::phi`]. All closed forms below are written in terms of
//! `ϑ` ([`ErcQuantities::state_label`]).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{PulseSegment, PulseSequence};
use crate::spin::{ket, ket_minus, ket_plus, outer, phi_state, Frame, StateVector3, SystemParams, Unitary3, IDX_ZERO};
use crate::{Mat3, Vec3, C64};

/// Characteristic quantities of one Raman configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErcQuantities {
    /// Generalized Rabi frequency Ω̄ = √(μ²B² + Ω²/4).
    pub omega_bar: f64,
    /// Full period T̄ = 2π/Ω̄.
    pub t_total: f64,
    /// Depletion time T̄′.
    pub t_prime: f64,
    /// T̄″ = T̄ − T̄′.
    pub t_second: f64,
    /// φ = arccos(2μB/Ω).
    pub phi: f64,
}

impl ErcQuantities {
    /// Quantities for Zeeman rate `mu_b` and drive `omega` (both angular).
    pub fn from_rates(mu_b: f64, omega: f64) -> Result<Self> {
        if !(mu_b.is_finite() && omega.is_finite()) || mu_b < 0.0 {
            return Err(Error::InvalidInput(format!("invalid rates muB={mu_b}, omega={omega}")));
        }
        let omega = omega.abs();
        if omega == 0.0 || omega < 2.0 * mu_b {
            return Err(Error::Regime { omega, mu_b, min_omega: 2.0 * mu_b });
        }
        let omega_bar = (mu_b * mu_b + 0.25 * omega * omega).sqrt();
        let ratio = 2.0 * mu_b / omega;
        let t_total = 2.0 * PI / omega_bar;
        let t_prime = (-(ratio * ratio)).max(-1.0).acos() / omega_bar;
        Ok(Self {
            omega_bar,
            t_total,
            t_prime,
            t_second: t_total - t_prime,
            phi: ratio.min(1.0).acos(),
        })
    }

    /// Label ϑ = 2φ of the equatorial state `|0⟩` is mapped onto after T̄′.
    pub fn state_label(&self) -> f64 {
        2.0 * self.phi
    }
}

/// Characteristic quantities for the bare drive `omega_x` and Zeeman rate `mu_b`.
///
/// Strain fields and the orthogonal drive are accounted for by
/// [`crate::strain`], which produces effective rates for the same formulas.
pub fn characteristic_quantities(p: &SystemParams) -> Result<ErcQuantities> {
    ErcQuantities::from_rates(p.mu_b, p.omega_x)
}

/// Bright and dark states `(|B_α⟩, |D_α⟩)` of the Raman problem.
pub fn bright_dark(p: &SystemParams, alpha: f64) -> Result<(StateVector3, StateVector3)> {
    let q = characteristic_quantities(p)?;
    let (b, d) = bright_dark_vectors(p.mu_b, p.omega_x.abs(), q.omega_bar, alpha);
    Ok((StateVector3::new(b)?, StateVector3::new(d)?))
}

pub(crate) fn bright_dark_vectors(mu_b: f64, omega: f64, omega_bar: f64, alpha: f64) -> (Vec3, Vec3) {
    let half = 0.5 * omega / omega_bar;
    let mb = mu_b / omega_bar;
    let zero = ket(IDX_ZERO);
    let bright = ket_minus() * C64::from(mb) + zero * C64::from_polar(half, -alpha);
    let dark = zero * C64::from(-mb) + ket_minus() * C64::from_polar(half, alpha);
    (bright, dark)
}

/// Pulse unitary for rates `(mu_b, omega)` in the rotating frame:
/// `cos Ω̄t (P_B + P_+) − i sin Ω̄t (|B⟩⟨+| + |+⟩⟨B|) + P_D`.
pub(crate) fn raman_unitary(mu_b: f64, omega: f64, t: f64, alpha: f64) -> Mat3 {
    // A negative amplitude is a π phase shift of the drive.
    let (omega, alpha) = if omega < 0.0 { (-omega, alpha + PI) } else { (omega, alpha) };
    let omega_bar = (mu_b * mu_b + 0.25 * omega * omega).sqrt();
    if omega_bar == 0.0 {
        return Mat3::identity();
    }
    let (bright, dark) = bright_dark_vectors(mu_b, omega, omega_bar, alpha);
    let plus = ket_plus();
    let (s, c) = (omega_bar * t).sin_cos();
    (outer(&bright, &bright) + outer(&plus, &plus)) * C64::from(c)
        - (outer(&bright, &plus) + outer(&plus, &bright)) * C64::new(0.0, s)
        + outer(&dark, &dark)
}

/// U(t, α) for the bare parameters, in the carrier frame.
pub fn erc_unitary(p: &SystemParams, t: f64, alpha: f64) -> Result<Unitary3> {
    characteristic_quantities(p)?;
    if t < 0.0 {
        return Err(Error::InvalidInput(format!("pulse duration must be >= 0, got {t}")));
    }
    Ok(Unitary3::new(raman_unitary(p.mu_b, p.omega_x, t, alpha), Frame::carrier_frame(p)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CharacteristicTime {
    #[serde(rename = "t_prime")]
    TPrime,
    #[serde(rename = "t_second")]
    TSecond,
}

/// Basis-transformation form of the pulse unitary at T̄′ or T̄″.
///
/// T̄′: `e^{iα}|ϑ⟩⟨0| + e^{−iα}|0⟩⟨−ϑ| − |π+ϑ⟩⟨π−ϑ|`
/// T̄″: `e^{iα}|−ϑ⟩⟨0| + e^{−iα}|0⟩⟨ϑ| − |π−ϑ⟩⟨π+ϑ|`
pub fn closed_form_unitary(p: &SystemParams, which: CharacteristicTime, alpha: f64) -> Result<Unitary3> {
    let q = characteristic_quantities(p)?;
    let m = closed_form_matrix(q.state_label(), which, alpha);
    Ok(Unitary3::new(m, Frame::carrier_frame(p)))
}

pub(crate) fn closed_form_matrix(label: f64, which: CharacteristicTime, alpha: f64) -> Mat3 {
    let st = |x: f64| *phi_state(x).amps();
    let zero = ket(IDX_ZERO);
    let (to, from, dq_to, dq_from) = match which {
        CharacteristicTime::TPrime => (st(label), st(-label), st(PI + label), st(PI - label)),
        CharacteristicTime::TSecond => (st(-label), st(label), st(PI - label), st(PI + label)),
    };
    outer(&to, &zero) * C64::from_polar(1.0, alpha) + outer(&zero, &from) * C64::from_polar(1.0, -alpha)
        - outer(&dq_to, &dq_from)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RotationAxis {
    /// Axis through `|ϑ⟩`: pulses T̄″ then T̄′.
    #[serde(rename = "plus_phi")]
    PlusPhi,
    /// Axis through `|−ϑ⟩`: pulses T̄′ then T̄″.
    #[serde(rename = "minus_phi")]
    MinusPhi,
}

impl RotationAxis {
    pub fn other(self) -> Self {
        match self {
            RotationAxis::PlusPhi => RotationAxis::MinusPhi,
            RotationAxis::MinusPhi => RotationAxis::PlusPhi,
        }
    }

    /// Label of the eigenstate with eigenvalue e^{iθ}.
    pub fn eigen_label(self, state_label: f64) -> f64 {
        match self {
            RotationAxis::PlusPhi => state_label,
            RotationAxis::MinusPhi => -state_label,
        }
    }
}

/// Rotation of the DQ Bloch sphere by `theta` about one of the two axes.
///
/// Eigenvalues: e^{−iθ} on `|0⟩`, e^{iθ} on `|∓ϑ⟩`, 1 on `|π∓ϑ⟩`. Worked
/// example: `R(−φ, π)` with Ω = 3μB sends `|+1⟩` to `|−1⟩` up to a phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DQRotation {
    pub axis: RotationAxis,
    pub theta: f64,
}

impl DQRotation {
    pub fn new(axis: RotationAxis, theta: f64) -> Self {
        Self { axis, theta: reduce_angle(theta) }
    }
}

/// Maps an angle to (−π, π].
pub fn reduce_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// Spectral form of a rotation for a given state label.
pub(crate) fn rotation_matrix(label: f64, r: &DQRotation) -> Mat3 {
    let eig = r.axis.eigen_label(label);
    let keep = *phi_state(PI + eig).amps();
    let turn = *phi_state(eig).amps();
    let zero = ket(IDX_ZERO);
    outer(&zero, &zero) * C64::from_polar(1.0, -r.theta)
        + outer(&turn, &turn) * C64::from_polar(1.0, r.theta)
        + outer(&keep, &keep)
}

/// Two pulses, in time order, realizing `r` with base phase `alpha`.
pub fn rotation_segments(p: &SystemParams, r: &DQRotation, alpha: f64) -> Result<[PulseSegment; 2]> {
    let q = characteristic_quantities(p)?;
    let (first, second) = match r.axis {
        RotationAxis::MinusPhi => (q.t_prime, q.t_second),
        RotationAxis::PlusPhi => (q.t_second, q.t_prime),
    };
    Ok([
        PulseSegment::for_params(first, alpha, p),
        PulseSegment::for_params(second, alpha + r.theta, p),
    ])
}

/// Rotation unitary (as the product of the two pulse unitaries) and the
/// pulse sequence that realizes it. Total duration is T̄.
pub fn dq_rotation(p: &SystemParams, r: &DQRotation, alpha: f64) -> Result<(Unitary3, PulseSequence)> {
    let segs = rotation_segments(p, r, alpha)?;
    let frame = Frame::carrier_frame(p);
    let mut u = Unitary3::identity(frame);
    for s in &segs {
        u = erc_unitary(p, s.duration, s.alpha)?.then_after(&u);
    }
    Ok((u, PulseSequence::new(segs.to_vec(), frame)))
}

/// Closed spectral form of a rotation, without going through the pulses.
pub fn rotation_closed_form(p: &SystemParams, r: &DQRotation) -> Result<Unitary3> {
    let q = characteristic_quantities(p)?;
    Ok(Unitary3::new(rotation_matrix(q.state_label(), r), Frame::carrier_frame(p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{operator_norm, IDX_MINUS1, IDX_PLUS1};

    fn p(omega: f64) -> SystemParams {
        SystemParams::reduced(omega)
    }

    #[test]
    fn quantities_at_regime_boundary() {
        let q = characteristic_quantities(&p(2.0)).unwrap();
        assert!((q.omega_bar - 2f64.sqrt()).abs() < 1e-15);
        assert!((q.t_prime - PI / 2f64.sqrt()).abs() < 1e-14);
        assert!((q.t_prime - q.t_total / 2.0).abs() < 1e-14);
        assert_eq!(q.phi, 0.0);
    }

    #[test]
    fn quantities_zero_field() {
        let q = characteristic_quantities(&SystemParams::new(10.0, 0.0, 1.0)).unwrap();
        assert!((q.omega_bar - 0.5).abs() < 1e-15);
        assert!((q.t_prime - PI).abs() < 1e-14);
        assert!((q.t_total - 4.0 * PI).abs() < 1e-14);
        assert!((q.phi - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn quantities_invariants() {
        for &(mu, om) in &[(1.0, 3.0), (0.3, 7.0), (2.0, 4.0), (0.0, 2.5)] {
            let q = ErcQuantities::from_rates(mu, om).unwrap();
            assert!((q.omega_bar.powi(2) - (mu * mu + om * om / 4.0)).abs() < 1e-12);
            assert!((q.t_prime + q.t_second - q.t_total).abs() < 1e-12);
            assert!(q.t_prime >= q.t_total / 4.0 - 1e-12 && q.t_prime <= q.t_total / 2.0 + 1e-12);
            assert!((q.phi.cos() - 2.0 * mu / om).abs() < 1e-12);
        }
        assert!((ErcQuantities::from_rates(1.0, 3.0).unwrap().phi - (2.0f64 / 3.0).acos()).abs() < 1e-15);
    }

    #[test]
    fn regime_error_reports_minimal_drive() {
        match characteristic_quantities(&p(1.5)) {
            Err(Error::Regime { min_omega, .. }) => assert_eq!(min_omega, 2.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bright_dark_zero_field() {
        let alpha = 0.8;
        let (b, d) = bright_dark(&SystemParams::new(10.0, 0.0, 1.0), alpha).unwrap();
        let expect_b = ket(IDX_ZERO) * C64::from_polar(1.0, -alpha);
        let expect_d = ket_minus() * C64::from_polar(1.0, alpha);
        assert!((b.amps() - expect_b).norm() < 1e-15);
        assert!((d.amps() - expect_d).norm() < 1e-15);
    }

    #[test]
    fn bright_dark_direct_evaluation() {
        // μB=1, Ω=3, α=π/4: Ω̄ = √(13)/2
        let alpha = PI / 4.0;
        let (b, d) = bright_dark(&p(3.0), alpha).unwrap();
        let ob = 13f64.sqrt() / 2.0;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let e = C64::from_polar(1.0, -alpha);
        let expect_b = [C64::from(s / ob), e * 1.5 / ob, C64::from(-s / ob)];
        let f = C64::from_polar(1.0, alpha);
        let expect_d = [f * (1.5 * s / ob), C64::from(-1.0 / ob), -f * (1.5 * s / ob)];
        for k in 0..3 {
            assert!((b.amps()[k] - expect_b[k]).norm() < 1e-15);
            assert!((d.amps()[k] - expect_d[k]).norm() < 1e-15);
        }
        assert!(b.overlap(&d).norm() < 1e-15);
    }

    #[test]
    fn unitary_identity_points() {
        let pp = p(3.0);
        let q = characteristic_quantities(&pp).unwrap();
        let id = Unitary3::identity(Frame::InteractionD);
        assert!(erc_unitary(&pp, 0.0, 0.3).unwrap().distance(&id) < 1e-15);
        assert!(erc_unitary(&pp, q.t_total, 0.3).unwrap().distance(&id) < 1e-12);
        let u = erc_unitary(&pp, q.t_prime, 0.0).unwrap();
        assert!(u.m[(IDX_ZERO, IDX_ZERO)].norm() < 1e-12);
        assert!(u.unitarity_defect() < 1e-14);
        assert!(erc_unitary(&pp, -1.0, 0.0).is_err());
    }

    #[test]
    fn closed_form_zero_field_maps_zero_to_label_pi() {
        let pp = SystemParams::new(10.0, 0.0, 1.0);
        let u = closed_form_unitary(&pp, CharacteristicTime::TPrime, 0.0).unwrap();
        let out = u.apply(&StateVector3::zero());
        // ϑ = 2·(π/2) = π: the state −i|+⟩ up to phase
        assert!((out.fidelity(&phi_state(PI)) - 1.0).abs() < 1e-14);
        assert!((out.fidelity(&StateVector3::plus()) - 1.0).abs() < 1e-14);
        let num = erc_unitary(&pp, characteristic_quantities(&pp).unwrap().t_prime, 0.0).unwrap();
        assert!(num.distance(&u) < 1e-12);
    }

    #[test]
    fn closed_forms_compose_to_identity() {
        let pp = p(3.0);
        for &a in &[0.0, 0.7, -2.1] {
            let u1 = closed_form_unitary(&pp, CharacteristicTime::TPrime, a).unwrap();
            let u2 = closed_form_unitary(&pp, CharacteristicTime::TSecond, a).unwrap();
            let prod = u2.then_after(&u1);
            assert!(prod.distance(&Unitary3::identity(prod.frame)) < 1e-12);
        }
    }

    #[test]
    fn rotation_not_gate() {
        let pp = p(3.0);
        let (u, seq) = dq_rotation(&pp, &DQRotation::new(RotationAxis::MinusPhi, PI), 0.0).unwrap();
        let out = u.apply(&StateVector3::plus1());
        assert!((out.populations()[IDX_MINUS1] - 1.0).abs() < 1e-12);
        let z = u.apply(&StateVector3::zero());
        assert!((z.populations()[IDX_ZERO] - 1.0).abs() < 1e-12);
        let q = characteristic_quantities(&pp).unwrap();
        assert!((seq.total_duration() - q.t_total).abs() < 1e-12);
        assert_eq!(seq.segments[0].alpha, 0.0);
        assert_eq!(seq.segments[1].alpha, PI);
        let _ = IDX_PLUS1;
    }

    #[test]
    fn zero_rotation_is_identity() {
        let pp = p(4.0);
        for axis in [RotationAxis::PlusPhi, RotationAxis::MinusPhi] {
            let (u, _) = dq_rotation(&pp, &DQRotation::new(axis, 0.0), 1.1).unwrap();
            assert!((u.fidelity(&Unitary3::identity(u.frame)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pulse_rotation_matches_spectral_form() {
        let pp = p(3.7);
        for axis in [RotationAxis::PlusPhi, RotationAxis::MinusPhi] {
            for &th in &[PI / 4.0, PI / 2.0, PI, -1.3] {
                let r = DQRotation::new(axis, th);
                let (u, _) = dq_rotation(&pp, &r, 0.4).unwrap();
                let c = rotation_closed_form(&pp, &r).unwrap();
                assert!(operator_norm(&(u.m - c.m)) < 1e-12, "{axis:?} {th}");
            }
        }
    }

    #[test]
    fn reduce_angle_range() {
        assert_eq!(reduce_angle(PI), PI);
        assert!((reduce_angle(-PI) - PI).abs() < 1e-15);
        assert!((reduce_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(reduce_angle(0.0), 0.0);
    }
}

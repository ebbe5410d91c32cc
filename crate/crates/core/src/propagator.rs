//! Numerical Schrödinger propagation, independent of the closed forms.
//!
//! Lab mode integrates the full time-dependent Hamiltonian (counter-rotating
//! terms included) with an explicit Runge–Kutta scheme. Rotating-frame mode
//! exponentiates the time-independent RWA Hamiltonian of each segment.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{PulseSegment, PulseSequence};
use crate::spin::{ket, ket_minus, ket_plus, outer, spin_matrices, Frame, StateVector3, SystemParams, Unitary3, IDX_ZERO};
use crate::{Mat3, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "fixed_rk4")]
    FixedRk4,
    /// Dormand–Prince 5(4) with local error control.
    #[serde(rename = "adaptive_embedded")]
    AdaptiveEmbedded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Step cap; `None` means a twentieth of the carrier period.
    pub max_step: Option<f64>,
    pub scheme: Scheme,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-12, max_step: None, scheme: Scheme::AdaptiveEmbedded }
    }
}

impl IntegratorConfig {
    pub fn fixed(max_step: f64) -> Self {
        Self { max_step: Some(max_step), scheme: Scheme::FixedRk4, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(v > 0.0 && v <= 1e-3) {
                return Err(Error::InvalidInput(format!("{name} must lie in (0, 1e-3], got {v}")));
            }
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidInput(format!("max_step must be positive, got {h}")));
            }
        }
        Ok(())
    }

    fn step_cap(&self, p: &SystemParams) -> f64 {
        self.max_step.unwrap_or_else(|| (2.0 * PI / p.carrier().abs().max(1e-300)) / 20.0)
    }
}

/// Lab-frame Hamiltonian at absolute time `t`:
/// `D S_z² + μB S_z + Ω_x cos(ω_c t − α) S_x − Ω_y cos(ω_c t − β) S_y + V`
/// with carrier `ω_c = D + E_z` and
/// `V = E_z S_z² + E_x (S_x² − S_y²) − E_y (S_x S_y + S_y S_x)`.
///
/// The y-drive and strain signs are fixed so that the rotating-wave limit is
/// exactly [`hamiltonian_rwa`].
pub fn hamiltonian_lab(p: &SystemParams, seg: &PulseSegment, t: f64) -> Mat3 {
    let s = spin_matrices();
    let wc = p.carrier();
    let sz2 = s.z * s.z;
    let static_part = sz2 * C64::from(p.d) + s.z * C64::from(p.mu_b) + strain_potential(p);
    let drive = s.x * C64::from(seg.omega_x * (wc * t - seg.alpha).cos())
        - s.y * C64::from(seg.omega_y * (wc * t - seg.beta).cos());
    static_part + drive
}

/// Static strain/electric potential in the lab frame.
pub fn strain_potential(p: &SystemParams) -> Mat3 {
    let s = spin_matrices();
    s.z * s.z * C64::from(p.ez) + (s.x * s.x - s.y * s.y) * C64::from(p.ex)
        - (s.x * s.y + s.y * s.x) * C64::from(p.ey)
}

/// Static Hamiltonian with the drive off.
pub fn hamiltonian_static(p: &SystemParams) -> Mat3 {
    let s = spin_matrices();
    s.z * s.z * C64::from(p.d) + s.z * C64::from(p.mu_b) + strain_potential(p)
}

/// Rotating-frame Hamiltonian with respect to (D + E_z) S_z²:
/// `E_x(|+⟩⟨+| − |−⟩⟨−|) + [(μB + iE_y)|−⟩⟨+| + (Ω_x/2)e^{iα}|+⟩⟨0| + i(Ω_y/2)e^{iβ}|−⟩⟨0| + h.c.]`.
///
/// Without fields or y drive this is the plain Raman Hamiltonian.
pub fn hamiltonian_rwa(p: &SystemParams, seg: &PulseSegment) -> Mat3 {
    let plus = ket_plus();
    let minus = ket_minus();
    let zero = ket(IDX_ZERO);
    let diag = (outer(&plus, &plus) - outer(&minus, &minus)) * C64::from(p.ex);
    let upper = outer(&minus, &plus) * C64::new(p.mu_b, p.ey)
        + outer(&plus, &zero) * C64::from_polar(0.5 * seg.omega_x, seg.alpha)
        + outer(&minus, &zero) * (C64::new(0.0, 1.0) * C64::from_polar(0.5 * seg.omega_y, seg.beta));
    diag + upper + upper.adjoint()
}

/// Result of a numerical propagation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagation {
    pub state: StateVector3,
    pub unitary: Unitary3,
    /// Largest per-step unitarity defect removed by renormalization.
    pub max_norm_drift: f64,
    pub steps: usize,
}

/// Propagates `s` through `seq`.
///
/// `frame = Lab` integrates the lab Hamiltonian and returns lab-frame
/// results; the interaction frames use exact per-segment exponentials of the
/// RWA Hamiltonian and return results in the requested frame.
pub fn propagate(
    p: &SystemParams,
    seq: &PulseSequence,
    s: &StateVector3,
    frame: Frame,
    cfg: &IntegratorConfig,
) -> Result<Propagation> {
    p.validate()?;
    cfg.validate()?;
    for seg in &seq.segments {
        seg.validate()?;
    }
    match frame {
        Frame::Lab => propagate_lab(p, seq, s, cfg),
        _ => {
            let carrier = Frame::carrier_frame(p);
            let mut u = Mat3::identity();
            for seg in &seq.segments {
                u = rwa_segment_propagator(p, seg) * u;
            }
            let mut unitary = Unitary3::new(u, carrier);
            if frame != carrier {
                unitary = frame_transform_unitary(&unitary, 0.0, seq.total_duration(), frame, p);
            }
            Ok(Propagation { state: unitary.apply(s), unitary, max_norm_drift: 0.0, steps: seq.segments.len() })
        }
    }
}

/// exp(−i H_rwa τ) for one segment.
pub fn rwa_segment_propagator(p: &SystemParams, seg: &PulseSegment) -> Mat3 {
    (hamiltonian_rwa(p, seg) * C64::new(0.0, -seg.duration)).exp()
}

fn propagate_lab(p: &SystemParams, seq: &PulseSequence, s: &StateVector3, cfg: &IntegratorConfig) -> Result<Propagation> {
    let cap = cfg.step_cap(p);
    let mut u = Mat3::identity();
    let mut t0 = 0.0;
    let mut drift: f64 = 0.0;
    let mut steps = 0;
    for seg in &seq.segments {
        let t1 = t0 + seg.duration;
        let rhs = |t: f64, y: &Mat3| -> Mat3 { hamiltonian_lab(p, seg, t) * y * C64::new(0.0, -1.0) };
        match cfg.scheme {
            Scheme::FixedRk4 => {
                if seg.duration > 0.0 {
                    let n = (seg.duration / cap).ceil().max(1.0) as usize;
                    let h = seg.duration / n as f64;
                    for k in 0..n {
                        let t = t0 + k as f64 * h;
                        u = rk4_step(&rhs, t, &u, h);
                        drift = drift.max(renormalize(&mut u));
                    }
                    steps += n;
                }
            }
            Scheme::AdaptiveEmbedded => {
                let mut t = t0;
                let mut h = cap.min(seg.duration);
                while t1 - t > 1e-15 * t1.abs().max(1.0) {
                    h = h.min(t1 - t).min(cap);
                    let (next, err) = dopri_step(&rhs, t, &u, h, cfg);
                    if err <= 1.0 {
                        t += h;
                        u = next;
                        drift = drift.max(renormalize(&mut u));
                        steps += 1;
                    }
                    let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    h *= factor;
                    if h < 1e-13 * t.abs().max(1.0) {
                        return Err(Error::StepSizeUnderflow { t_reached: t });
                    }
                }
            }
        }
        t0 = t1;
    }
    let unitary = Unitary3::new(u, Frame::Lab);
    Ok(Propagation { state: unitary.apply(s), unitary, max_norm_drift: drift, steps })
}

fn rk4_step<F: Fn(f64, &Mat3) -> Mat3>(f: &F, t: f64, y: &Mat3, h: f64) -> Mat3 {
    let hc = C64::from(h);
    let half = C64::from(0.5 * h);
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &(y + k1 * half));
    let k3 = f(t + 0.5 * h, &(y + k2 * half));
    let k4 = f(t + h, &(y + k3 * hc));
    y + (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(h / 6.0)
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn dopri_step<F: Fn(f64, &Mat3) -> Mat3>(f: &F, t: f64, y: &Mat3, h: f64, cfg: &IntegratorConfig) -> (Mat3, f64) {
    let c = |x: f64| C64::from(h * x);
    let k1 = f(t, y);
    let k2 = f(t + C2 * h, &(y + k1 * c(A21)));
    let k3 = f(t + C3 * h, &(y + k1 * c(A31) + k2 * c(A32)));
    let k4 = f(t + C4 * h, &(y + k1 * c(A41) + k2 * c(A42) + k3 * c(A43)));
    let k5 = f(t + C5 * h, &(y + k1 * c(A51) + k2 * c(A52) + k3 * c(A53) + k4 * c(A54)));
    let k6 = f(t + h, &(y + k1 * c(A61) + k2 * c(A62) + k3 * c(A63) + k4 * c(A64) + k5 * c(A65)));
    let next = y + k1 * c(B1) + k3 * c(B3) + k4 * c(B4) + k5 * c(B5) + k6 * c(B6);
    let k7 = f(t + h, &next);
    let err = k1 * c(E1) + k3 * c(E3) + k4 * c(E4) + k5 * c(E5) + k6 * c(E6) + k7 * c(E7);
    let mut worst: f64 = 0.0;
    for (e, (a, b)) in err.iter().zip(y.iter().zip(next.iter())) {
        let scale = cfg.abs_tol + cfg.rel_tol * a.norm().max(b.norm());
        worst = worst.max(e.norm() / scale);
    }
    (next, worst)
}

/// One Newton–Schulz polar step towards the nearest unitary; returns the
/// defect ‖U†U − I‖ (max entry) before the correction.
fn renormalize(u: &mut Mat3) -> f64 {
    let g = u.adjoint() * *u;
    let defect = (g - Mat3::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if defect > 0.0 {
        *u = *u * (Mat3::identity() * C64::from(3.0) - g) * C64::from(0.5);
    }
    defect
}

fn frame_phase(delta: f64, t: f64) -> Mat3 {
    let e = C64::from_polar(1.0, delta * t);
    Mat3::from_diagonal(&nalgebra::Vector3::new(e, C64::from(1.0), e))
}

/// Moves a state at time `t` from frame `from` to frame `to`.
pub fn frame_transform_state(s: &StateVector3, t: f64, from: Frame, to: Frame, p: &SystemParams) -> StateVector3 {
    let delta = to.reference_frequency(p) - from.reference_frequency(p);
    StateVector3::new(frame_phase(delta, t) * s.amps()).expect("frame rotation preserves the norm")
}

/// Re-expresses a propagator from `t_start` to `t_end` in frame `to`.
pub fn frame_transform_unitary(u: &Unitary3, t_start: f64, t_end: f64, to: Frame, p: &SystemParams) -> Unitary3 {
    let delta = to.reference_frequency(p) - u.frame.reference_frequency(p);
    Unitary3::new(frame_phase(delta, t_end) * u.m * frame_phase(delta, t_start).adjoint(), to)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::erc::{bright_dark, characteristic_quantities, erc_unitary};
    use crate::spin::{operator_norm, IDX_MINUS1, IDX_PLUS1};
    use crate::Vec3;

    fn seg(omega: f64, alpha: f64) -> PulseSegment {
        PulseSegment::new(1.0, alpha, omega)
    }

    #[test]
    fn static_lab_hamiltonian_is_diagonal() {
        let p = SystemParams::new(20.0, 1.3, 0.0);
        let h = hamiltonian_lab(&p, &PulseSegment::new(1.0, 0.0, 0.0), 0.7);
        let expect = Mat3::from_diagonal(&nalgebra::Vector3::new(C64::from(21.3), C64::from(0.0), C64::from(18.7)));
        assert!(operator_norm(&(h - expect)) < 1e-14);
    }

    #[test]
    fn lab_hamiltonian_is_hermitian() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let p = SystemParams::new(rng.random_range(1.0..100.0), rng.random_range(0.0..3.0), rng.random_range(0.0..5.0))
                .with_omega_y(rng.random_range(-2.0..2.0))
                .with_fields(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let s = PulseSegment {
                duration: 1.0,
                alpha: rng.random_range(-PI..PI),
                beta: rng.random_range(-PI..PI),
                omega_x: p.omega_x,
                omega_y: p.omega_y,
            };
            let h = hamiltonian_lab(&p, &s, rng.random_range(0.0..10.0));
            assert!(operator_norm(&(h - h.adjoint())) < 1e-14);
        }
    }

    #[test]
    fn ez_shifts_both_dq_levels() {
        let p = SystemParams::new(20.0, 1.0, 0.0).with_fields(0.0, 0.0, 0.35);
        let mut ev: Vec<f64> = hamiltonian_static(&p).symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-14);
        assert!((ev[1] - (20.0 + 0.35 - 1.0)).abs() < 1e-13);
        assert!((ev[2] - (20.0 + 0.35 + 1.0)).abs() < 1e-13);
    }

    #[test]
    fn rwa_raman_form() {
        let p = SystemParams::reduced(3.0);
        let alpha = 0.6;
        let h = hamiltonian_rwa(&p, &seg(3.0, alpha));
        let plus = ket_plus();
        let minus = ket_minus();
        let zero = ket(IDX_ZERO);
        let el = |a: &Vec3, b: &Vec3| a.dotc(&(h * b));
        assert!((el(&minus, &plus) - C64::from(1.0)).norm() < 1e-15);
        assert!((el(&plus, &zero) - C64::from_polar(1.5, alpha)).norm() < 1e-15);
        assert!(el(&minus, &zero).norm() < 1e-15);
        assert!(el(&plus, &plus).norm() < 1e-15 && el(&minus, &minus).norm() < 1e-15);
    }

    #[test]
    fn rwa_ex_adds_diagonal_terms() {
        let p0 = SystemParams::reduced(3.0);
        let p = p0.with_fields(0.4, 0.0, 0.0);
        let diff = hamiltonian_rwa(&p, &seg(3.0, 0.0)) - hamiltonian_rwa(&p0, &seg(3.0, 0.0));
        let expect = (outer(&ket_plus(), &ket_plus()) - outer(&ket_minus(), &ket_minus())) * C64::from(0.4);
        assert!(operator_norm(&(diff - expect)) < 1e-15);
    }

    #[test]
    fn dark_state_is_annihilated() {
        for &(om, a) in &[(3.0, 0.0), (2.5, 1.2), (7.0, -2.0)] {
            let p = SystemParams::reduced(om);
            let (_, d) = bright_dark(&p, a).unwrap();
            let h = hamiltonian_rwa(&p, &seg(om, a));
            assert!((h * d.amps()).norm() < 1e-13);
        }
    }

    #[test]
    fn lab_drive_terms_reduce_to_rwa_couplings() {
        // Average the interaction-picture lab Hamiltonian over one carrier
        // period: the counter-rotating parts cancel and the RWA form remains.
        let p = SystemParams::new(40.0, 0.7, 2.0).with_omega_y(1.3).with_fields(0.2, -0.3, 0.0);
        let s = PulseSegment { duration: 1.0, alpha: 0.4, beta: -0.9, omega_x: 2.0, omega_y: 1.3 };
        let period = 2.0 * PI / p.carrier();
        let n = 4000;
        let mut avg = Mat3::zeros();
        let sz2 = spin_matrices().z * spin_matrices().z * C64::from(p.carrier());
        for k in 0..n {
            let t = (k as f64 + 0.5) * period / n as f64;
            let rot = frame_phase(p.carrier(), t);
            avg += rot * (hamiltonian_lab(&p, &s, t) - sz2) * rot.adjoint();
        }
        avg /= C64::from(n as f64);
        assert!(operator_norm(&(avg - hamiltonian_rwa(&p, &s))) < 1e-12);
    }

    #[test]
    fn rwa_propagation_matches_closed_form() {
        let p = SystemParams::reduced(3.0);
        let q = characteristic_quantities(&p).unwrap();
        for &a in &[0.0, 1.0, -2.5] {
            let seq = PulseSequence::new(vec![PulseSegment::new(q.t_prime, a, 3.0)], Frame::InteractionD);
            let run = propagate(&p, &seq, &StateVector3::zero(), Frame::InteractionD, &IntegratorConfig::default()).unwrap();
            let exact = erc_unitary(&p, q.t_prime, a).unwrap();
            assert!(run.unitary.distance(&exact) < 1e-9);
        }
    }

    #[test]
    fn zero_duration_is_identity() {
        let p = SystemParams::reduced(3.0);
        let seq = PulseSequence::new(vec![PulseSegment::new(0.0, 0.0, 3.0)], Frame::InteractionD);
        for frame in [Frame::Lab, Frame::InteractionD] {
            let run = propagate(&p, &seq, &StateVector3::plus1(), frame, &IntegratorConfig::default()).unwrap();
            assert!(run.unitary.distance(&Unitary3::identity(frame)) < 1e-15);
        }
    }

    #[test]
    fn frame_round_trip() {
        let p = SystemParams::new(500.0, 1.0, 3.0).with_fields(0.0, 0.0, 0.3);
        let s = StateVector3::new(Vec3::new(C64::new(0.3, 0.1), C64::new(-0.5, 0.2), C64::new(0.1, 0.7))).unwrap();
        let there = frame_transform_state(&s, 1.7, Frame::Lab, Frame::InteractionDPlusEz, &p);
        let back = frame_transform_state(&there, 1.7, Frame::InteractionDPlusEz, Frame::Lab, &p);
        assert!((back.amps() - s.amps()).norm() < 1e-12);
        let same = frame_transform_state(&s, 0.0, Frame::Lab, Frame::InteractionD, &p);
        assert!((same.amps() - s.amps()).norm() < 1e-15);
    }

    #[test]
    fn invalid_config_rejected() {
        let p = SystemParams::reduced(3.0);
        let seq = PulseSequence::empty(Frame::Lab);
        let mut cfg = IntegratorConfig::default();
        cfg.rel_tol = 0.1;
        assert!(propagate(&p, &seq, &StateVector3::zero(), Frame::Lab, &cfg).is_err());
        cfg = IntegratorConfig::default();
        cfg.max_step = Some(-1.0);
        assert!(propagate(&p, &seq, &StateVector3::zero(), Frame::Lab, &cfg).is_err());
    }

    #[test]
    fn lab_not_gate_close_to_rwa() {
        let p = SystemParams::reduced(3.0);
        let seq = crate::sequence::not_gate_sequence(&p).unwrap();
        let run = propagate(&p, &seq, &StateVector3::plus1(), Frame::Lab, &IntegratorConfig::default()).unwrap();
        let pops = run.state.populations();
        assert!((pops[IDX_MINUS1] - 1.0).abs() < 5e-3, "{pops:?}");
        assert!(pops[IDX_PLUS1] < 5e-3);
        assert!(run.max_norm_drift < 1e-10, "drift {}", run.max_norm_drift);
    }
}

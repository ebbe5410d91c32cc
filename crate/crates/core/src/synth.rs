//! Arbitrary DQ gates from rotations about the two available axes.
//!
//! Each rotation restricted to span{|+1⟩, |−1⟩} is `e^{iθ/2}·exp(iθ/2 n·σ)`
//! with `n` the Bloch vector of its e^{iθ} eigenstate, so a program is a
//! product of SU(2) factors about two fixed axes (a generalized Euler
//! decomposition). Short ansätze are solved by Levenberg–Marquardt with
//! seeded random restarts; longer alternating sequences start from a
//! constructive cone-walking solution and are polished the same way.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3 as RMat3, Vector3 as RVec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::erc::{characteristic_quantities, rotation_segments, DQRotation, RotationAxis};
use crate::error::{Error, Result};
use crate::sequence::{analytic_sequence_unitary, PulseSequence};
use crate::spin::{dq_fidelity, dq_projection, phi_state, Frame, SystemParams};
use crate::{Mat2, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisConfig {
    /// Minimal separation (rad) of the two rotation axes.
    pub phi_min: f64,
    /// Required phase-insensitive DQ fidelity.
    pub min_fidelity: f64,
    /// Random restarts per ansatz.
    pub restarts: usize,
    /// Hard cap on the number of rotations; `None` derives it from the axis separation.
    pub max_rotations: Option<usize>,
    pub seed: u64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self { phi_min: 1e-3, min_fidelity: 1.0 - 1e-9, restarts: 16, max_rotations: None, seed: 0x5eed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateSynthesis {
    pub rotations: Vec<DQRotation>,
    pub sequence: PulseSequence,
    /// |tr(V†W)|/2 of the executed program against the target.
    pub fidelity: f64,
    /// Largest |0⟩ ↔ DQ transfer probability of the executed program.
    pub leakage: f64,
}

/// Geometry of the two rotation axes for a parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisPair {
    /// Bloch vector of the `minus_phi` axis.
    pub minus: RVec3<f64>,
    /// Bloch vector of the `plus_phi` axis.
    pub plus: RVec3<f64>,
}

impl AxisPair {
    pub fn for_params(p: &SystemParams) -> Result<Self> {
        let q = characteristic_quantities(p)?;
        Ok(Self::from_label(q.state_label()))
    }

    pub fn from_label(label: f64) -> Self {
        let v = |x: f64| {
            let b = dq_projection(&phi_state(x));
            RVec3::new(b.x, b.y, b.z)
        };
        Self { minus: v(-label), plus: v(label) }
    }

    pub fn axis(&self, a: RotationAxis) -> RVec3<f64> {
        match a {
            RotationAxis::MinusPhi => self.minus,
            RotationAxis::PlusPhi => self.plus,
        }
    }

    /// Angle between the axis lines, in [0, π/2].
    pub fn line_separation(&self) -> f64 {
        self.minus.dot(&self.plus).abs().min(1.0).acos()
    }
}

/// Synthesizes `target` (a 2×2 unitary on span{|+1⟩, |−1⟩}) with default settings.
pub fn synthesize_gate(p: &SystemParams, target: &Mat2) -> Result<GateSynthesis> {
    synthesize_gate_with(p, target, &SynthesisConfig::default())
}

pub fn synthesize_gate_with(p: &SystemParams, target: &Mat2, cfg: &SynthesisConfig) -> Result<GateSynthesis> {
    p.validate()?;
    let q = characteristic_quantities(p)?;
    let axes = AxisPair::from_label(q.state_label());
    let separation = axes.line_separation().min(q.phi);
    if separation <= cfg.phi_min {
        return Err(Error::AxisDegenerate { separation, threshold: cfg.phi_min });
    }
    let defect = (target.adjoint() * target - Mat2::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !defect.is_finite() || defect > 1e-10 {
        return Err(Error::InvalidInput(format!("target is not unitary (defect {defect:e})")));
    }
    let v = to_su2(target);
    let frame = Frame::carrier_frame(p);
    if dq_fidelity(&Mat2::identity(), &v) >= 1.0 - 1e-14 {
        return Ok(GateSynthesis { rotations: Vec::new(), sequence: PulseSequence::empty(frame), fidelity: 1.0, leakage: 0.0 });
    }

    let gamma = axes.line_separation();
    let needed = 2 * (PI / (2.0 * gamma)).ceil() as usize + 1;
    let max_len = cfg.max_rotations.unwrap_or(needed + 2).max(1);
    let mut best_residual: f64 = 1.0;
    let mut attempts = 0;

    for n in 1..=max_len {
        for start in [RotationAxis::MinusPhi, RotationAxis::PlusPhi] {
            let pattern = alternating(start, n);
            let dirs: Vec<RVec3<f64>> = pattern.iter().map(|a| axes.axis(*a)).collect();
            if n == 3 && !euler_feasible(&dirs, &v) {
                continue;
            }
            attempts += 1;
            let mut seeds: Vec<Vec<f64>> = Vec::new();
            if n >= 3 && n % 2 == 1 {
                if let Some(s) = cone_walk_seed(dirs[0], dirs[1], &v, n) {
                    seeds.push(s);
                }
            }
            let seed_base = cfg.seed ^ ((n as u64) << 32) ^ (start as u64);
            seeds.extend((0..cfg.restarts).map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed_base.wrapping_add(k as u64 * 0x9e37_79b9));
                (0..n).map(|_| rng.random_range(-PI..PI)).collect()
            }));
            let results: Vec<(usize, Vec<f64>, f64)> = seeds
                .into_par_iter()
                .enumerate()
                .map(|(k, s)| {
                    let (th, f) = levenberg_marquardt(&dirs, &v, s);
                    (k, th, f)
                })
                .collect();
            let (_, thetas, fid) = results
                .into_iter()
                .reduce(|a, b| if b.2 > a.2 || (b.2 == a.2 && b.0 < a.0) { b } else { a })
                .expect("at least one restart");
            best_residual = best_residual.min(1.0 - fid);
            if fid >= cfg.min_fidelity {
                let rotations: Vec<DQRotation> =
                    pattern.iter().zip(&thetas).map(|(a, t)| DQRotation::new(*a, *t)).collect();
                let out = realize(p, &rotations, target, frame)?;
                if out.fidelity >= cfg.min_fidelity {
                    return Ok(out);
                }
                best_residual = best_residual.min(1.0 - out.fidelity);
            }
        }
    }
    Err(Error::NoConvergence { residual: best_residual, attempts })
}

/// Builds the pulse program and checks it with the closed-form pulse unitaries.
fn realize(p: &SystemParams, rotations: &[DQRotation], target: &Mat2, frame: Frame) -> Result<GateSynthesis> {
    let mut seq = PulseSequence::empty(frame);
    for r in rotations {
        seq.segments.extend_from_slice(&rotation_segments(p, r, 0.0)?);
    }
    let u = analytic_sequence_unitary(p, &seq)?;
    Ok(GateSynthesis {
        rotations: rotations.to_vec(),
        fidelity: dq_fidelity(target, &u.dq_block()),
        leakage: u.leakage(),
        sequence: seq,
    })
}

fn alternating(start: RotationAxis, n: usize) -> Vec<RotationAxis> {
    let mut out = Vec::with_capacity(n);
    let mut a = start;
    for _ in 0..n {
        out.push(a);
        a = a.other();
    }
    out
}

/// Uniformly random SU(2) element (Haar measure).
pub fn haar_random_su2<R: Rng>(rng: &mut R) -> Mat2 {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n2: f64 = q.iter().map(|x| x * x).sum();
        if n2 > 1e-6 && n2 <= 1.0 {
            let n = n2.sqrt();
            let (a, b, c, d) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
            return Mat2::new(C64::new(a, b), C64::new(c, d), C64::new(-c, d), C64::new(a, -b));
        }
    }
}

fn to_su2(u: &Mat2) -> Mat2 {
    let det = u.determinant();
    u / det.sqrt()
}

fn pauli_dot(n: &RVec3<f64>) -> Mat2 {
    Mat2::new(C64::from(n.z), C64::new(n.x, -n.y), C64::new(n.x, n.y), C64::from(-n.z))
}

/// exp(iθ/2 n·σ) and its θ derivative.
fn su2_factor(n: &RVec3<f64>, theta: f64) -> (Mat2, Mat2) {
    let (s, c) = (0.5 * theta).sin_cos();
    let ns = pauli_dot(n);
    let i = C64::new(0.0, 1.0);
    let g = Mat2::identity() * C64::from(c) + ns * (i * s);
    let dg = Mat2::identity() * C64::from(-0.5 * s) + ns * (i * (0.5 * c));
    (g, dg)
}

fn compose(dirs: &[RVec3<f64>], thetas: &[f64]) -> Mat2 {
    dirs.iter().zip(thetas).fold(Mat2::identity(), |acc, (n, t)| su2_factor(n, *t).0 * acc)
}

fn su2_fidelity(v: &Mat2, w: &Mat2) -> f64 {
    dq_fidelity(v, w)
}

/// Minimizes ‖W(θ) ∓ V‖ over the rotation angles.
fn levenberg_marquardt(dirs: &[RVec3<f64>], v: &Mat2, mut theta: Vec<f64>) -> (Vec<f64>, f64) {
    let n = dirs.len();
    let residual = |w: &Mat2| -> (DVector<f64>, f64) {
        let tr = (v.adjoint() * w).trace();
        let s = if tr.re >= 0.0 { 1.0 } else { -1.0 };
        let d = w - v * C64::from(s);
        let r = DVector::from_iterator(8, d.iter().flat_map(|z| [z.re, z.im]));
        let c = r.norm_squared();
        (r, c)
    };
    let mut w = compose(dirs, &theta);
    let (mut r, mut cost) = residual(&w);
    let mut lambda = 1e-3;
    for _ in 0..400 {
        if 1.0 - su2_fidelity(v, &w) < 1e-15 {
            break;
        }
        let factors: Vec<(Mat2, Mat2)> = dirs.iter().zip(&theta).map(|(d, t)| su2_factor(d, *t)).collect();
        let mut prefix = vec![Mat2::identity(); n + 1];
        for k in 0..n {
            prefix[k + 1] = factors[k].0 * prefix[k];
        }
        let mut suffix = vec![Mat2::identity(); n + 1];
        for k in (0..n).rev() {
            suffix[k] = suffix[k + 1] * factors[k].0;
        }
        let mut jac = DMatrix::<f64>::zeros(8, n);
        for k in 0..n {
            let dk = suffix[k + 1] * factors[k].1 * prefix[k];
            for (row, z) in dk.iter().flat_map(|z| [z.re, z.im]).enumerate() {
                jac[(row, k)] = z;
            }
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * &r;
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * (1.0 + jtj[(k, k)]);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 4.0;
                continue;
            };
            let step = chol.solve(&(-&grad));
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, d)| t + d).collect();
            let w_trial = compose(dirs, &trial);
            let (r_trial, c_trial) = residual(&w_trial);
            if c_trial < cost {
                theta = trial;
                w = w_trial;
                r = r_trial;
                cost = c_trial;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    let f = su2_fidelity(v, &w);
    (theta, f)
}

/// SO(3) image of an SU(2) element: R_ij = ½ tr(σ_i U σ_j U†).
fn so3(u: &Mat2) -> RMat3<f64> {
    let paulis = [
        pauli_dot(&RVec3::new(1.0, 0.0, 0.0)),
        pauli_dot(&RVec3::new(0.0, 1.0, 0.0)),
        pauli_dot(&RVec3::new(0.0, 0.0, 1.0)),
    ];
    RMat3::from_fn(|i, j| 0.5 * (paulis[i] * u * paulis[j] * u.adjoint()).trace().re)
}

fn angle_between(a: &RVec3<f64>, b: &RVec3<f64>) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos()
}

/// A·B·A form (outer axis a, middle axis b) exists iff the target moves `a`
/// by no more than twice the line separation of the axes.
fn euler_feasible(dirs: &[RVec3<f64>], v: &Mat2) -> bool {
    let a = dirs[0];
    let b = dirs[1];
    let gamma = angle_between(&a, &b);
    let gamma = gamma.min(PI - gamma);
    let moved = so3(v) * a;
    angle_between(&a, &moved) <= 2.0 * gamma + 1e-9
}

/// Right-handed rotation by `psi` about unit `n`.
fn rot(n: &RVec3<f64>, psi: f64) -> RMat3<f64> {
    nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_unchecked(*n), psi).into_inner()
}

/// Solves `A cos x + B sin x = c` for x, if possible.
fn solve_trig(a: f64, b: f64, c: f64) -> Option<f64> {
    let r = a.hypot(b);
    if r < 1e-14 {
        return (c.abs() < 1e-9).then_some(0.0);
    }
    let ratio = c / r;
    if ratio.abs() > 1.0 + 1e-9 {
        return None;
    }
    Some(b.atan2(a) + ratio.clamp(-1.0, 1.0).acos())
}

/// Angle x with `target · Rot(n, x) v = cos_goal`.
fn turn_to(n: &RVec3<f64>, v: &RVec3<f64>, target: &RVec3<f64>, cos_goal: f64) -> Option<f64> {
    let par = *n * n.dot(v);
    let perp = v - par;
    let cross = n.cross(v);
    solve_trig(target.dot(&perp), target.dot(&cross), cos_goal - target.dot(&par))
}

/// Constructive angles for the alternating program a, b, a, …, a with `len`
/// factors (odd), if `len` suffices. Angles are in the `exp(iθ/2 n·σ)`
/// convention, i.e. SO(3) rotations by −θ.
fn cone_walk_seed(a: RVec3<f64>, b: RVec3<f64>, v: &Mat2, len: usize) -> Option<Vec<f64>> {
    let g = so3(v);
    let w = g * a;
    let total = angle_between(&a, &w);
    let gamma_dir = angle_between(&a, &b);
    // rotate about whichever of ±b is closer to a
    let (b_eff, b_sign) = if gamma_dir <= PI / 2.0 { (b, 1.0) } else { (-b, -1.0) };
    let gamma = gamma_dir.min(PI - gamma_dir);
    let k = (len - 1) / 2;
    if total > 2.0 * gamma * k as f64 + 1e-9 || k == 0 {
        return None;
    }
    // ψ angles (SO(3)), in application order
    let mut psis: Vec<f64> = vec![0.0; len];
    let mut x = a;
    let mut rho = 0.0;
    for j in 1..=k {
        let rho_next = total * j as f64 / k as f64;
        let lo = (rho_next - gamma).abs().max((rho - gamma).abs());
        let hi = (rho + gamma).min(rho_next + gamma).min(2.0 * PI - rho - gamma).min(2.0 * PI - rho_next - gamma);
        if lo > hi + 1e-9 {
            return None;
        }
        let sigma = 0.5 * (lo + hi.max(lo));
        let alpha = if j == 1 { 0.0 } else { turn_to(&a, &x, &b_eff, sigma.cos())? };
        let y = rot(&a, alpha) * x;
        let beta = turn_to(&b_eff, &y, &a, rho_next.cos())?;
        x = rot(&b_eff, beta) * y;
        if j > 1 {
            psis[2 * j - 2] = alpha;
        }
        psis[2 * j - 1] = beta * b_sign;
        rho = rho_next;
    }
    // last rotation about a takes x onto w
    let xp = x - a * a.dot(&x);
    let wp = w - a * a.dot(&w);
    let last = if xp.norm() > 1e-12 && wp.norm() > 1e-12 { a.dot(&xp.cross(&wp)).atan2(xp.dot(&wp)) } else { 0.0 };
    psis[len - 1] = last;
    // S maps a onto w; the residual g⁻¹S is a rotation about a absorbed first.
    let mut s = RMat3::identity();
    for (idx, psi) in psis.iter().enumerate().skip(1) {
        let axis = if idx % 2 == 1 { b } else { a };
        s = rot(&axis, *psi) * s;
    }
    let residual = g.transpose() * s;
    let probe = if a.x.abs() < 0.9 { RVec3::new(1.0, 0.0, 0.0) } else { RVec3::new(0.0, 1.0, 0.0) };
    let u = (probe - a * a.dot(&probe)).normalize();
    let ru = residual * u;
    let chi = a.dot(&u.cross(&ru)).atan2(u.dot(&ru));
    psis[0] = -chi;
    Some(psis.into_iter().map(|p| -p).collect())
}

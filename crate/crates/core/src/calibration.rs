//! Simulated calibration: spectroscopy for the carrier, a Rabi scan for the
//! characteristic times, and the drive-ratio scan that restores depletion
//! under E_x.

use std::f64::consts::PI;

use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagator::{hamiltonian_rwa, hamiltonian_static, propagate, IntegratorConfig};
use crate::sequence::{Method, PulseSegment, PulseSequence};
use crate::spin::{Frame, StateVector3, SystemParams, IDX_ZERO};
use crate::strain::{effective_params, phi_from_times};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdmrSpectrum {
    /// Static energies, ascending.
    pub levels: [f64; 3],
    /// Mean of the two upper levels.
    pub carrier: f64,
}

pub fn simulate_odmr(p: &SystemParams) -> OdmrSpectrum {
    let eig = SymmetricEigen::new(hamiltonian_static(p));
    let mut levels = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
    levels.sort_by(f64::total_cmp);
    OdmrSpectrum { levels, carrier: 0.5 * (levels[1] + levels[2]) }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiScan {
    pub t_max: f64,
    pub n_points: usize,
}

impl RabiScan {
    /// A window of about 1.3 periods for the drive of `p`.
    pub fn covering(p: &SystemParams) -> Self {
        // Ω̄ ≥ max(μB, Ω/2) bounds the period from above
        let rate = p.mu_b_eff().max(0.5 * p.omega_eff());
        Self { t_max: 1.3 * 2.0 * PI / rate, n_points: 256 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::InvalidInput(format!("scan t_max must be positive, got {}", self.t_max)));
        }
        if self.n_points < 64 {
            return Err(Error::InvalidInput(format!("scan needs at least 64 points, got {}", self.n_points)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RabiEstimate {
    pub t_total: f64,
    pub t_prime: f64,
    pub t_second: f64,
    pub phi: f64,
}

/// ⟨0|U(t)|0⟩ for a single constant drive segment at phase 0.
fn ground_amplitude(p: &SystemParams, t: f64, method: Method, cfg: &IntegratorConfig) -> Result<C64> {
    let seg = PulseSegment::for_params(t, 0.0, p);
    let u = match method {
        Method::Analytic => effective_params(p)?.erc_unitary(t, 0.0).m,
        Method::RwaNumeric => crate::propagator::rwa_segment_propagator(p, &seg),
        Method::LabNumeric => {
            let seq = PulseSequence::new(vec![seg], Frame::Lab);
            propagate(p, &seq, &StateVector3::zero(), Frame::Lab, cfg)?.unitary.m
        }
    };
    Ok(u[(IDX_ZERO, IDX_ZERO)])
}

fn bisect<F: FnMut(f64) -> Result<f64>>(mut f: F, mut lo: f64, mut hi: f64, mut f_lo: f64) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Extracts T̄′, T̄″ and T̄ from a simulated Rabi experiment on |0⟩.
///
/// The |0⟩ amplitude is real in the carrier frame and changes sign at each
/// zero of the population, so the zeros are bracketed on the sample grid and
/// refined by bisection on the propagated amplitude itself. The return to
/// full population is the first maximum after the second zero, located the
/// same way on a central-difference derivative.
pub fn rabi_extract(p: &SystemParams, scan: &RabiScan, method: Method) -> Result<RabiEstimate> {
    rabi_extract_with(p, scan, method, &IntegratorConfig::default())
}

pub fn rabi_extract_with(
    p: &SystemParams,
    scan: &RabiScan,
    method: Method,
    cfg: &IntegratorConfig,
) -> Result<RabiEstimate> {
    p.validate()?;
    scan.validate()?;
    let amp = |t: f64| ground_amplitude(p, t, method, cfg).map(|a| a.re);
    let dt = scan.t_max / (scan.n_points - 1) as f64;
    let samples: Vec<f64> = (0..scan.n_points).map(|k| amp(k as f64 * dt)).collect::<Result<_>>()?;

    let mut zeros = Vec::new();
    for k in 1..scan.n_points {
        if zeros.len() == 2 {
            break;
        }
        let (a, b) = (samples[k - 1], samples[k]);
        if (a > 0.0) != (b > 0.0) || b == 0.0 {
            let lo = (k - 1) as f64 * dt;
            zeros.push(if b == 0.0 { k as f64 * dt } else { bisect(amp, lo, lo + dt, a)? });
        }
    }
    let [t_prime, t_second] = zeros[..] else {
        return Err(Error::Extraction(format!(
            "|0> population has {} zero(s) in [0, {}]; drive too weak for full depletion",
            zeros.len(),
            scan.t_max
        )));
    };

    let h = 1e-5 * dt;
    let slope = |t: f64| -> Result<f64> { Ok((amp(t + h)? - amp(t - h)?) / (2.0 * h)) };
    let start = (t_second / dt).ceil() as usize;
    let mut t_total = None;
    let mut prev_t = t_second;
    let mut prev_s = slope(t_second)?;
    for k in start..scan.n_points {
        let t = (k as f64 * dt).max(t_second + h);
        let s = slope(t)?;
        if prev_s > 0.0 && s <= 0.0 {
            t_total = Some(bisect(slope, prev_t, t, prev_s)?);
            break;
        }
        prev_t = t;
        prev_s = s;
    }
    let t_total = t_total.ok_or_else(|| {
        Error::Extraction(format!("no return of the |0> population within [0, {}]; widen the scan", scan.t_max))
    })?;
    let phi = phi_from_times(t_prime, t_total).map_err(|e| Error::Extraction(e.to_string()))?;
    Ok(RabiEstimate { t_total, t_prime, t_second: t_total - t_prime, phi })
}

/// NOT program from measured times: (T̄′, phase 0) then (T̄ − T̄′, phase π).
pub fn not_gate_from_estimate(p: &SystemParams, est: &RabiEstimate) -> PulseSequence {
    PulseSequence::new(
        vec![PulseSegment::for_params(est.t_prime, 0.0, p), PulseSegment::for_params(est.t_second, PI, p)],
        Frame::carrier_frame(p),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioScan {
    pub best_ratio: f64,
    /// (Ω_y/Ω_x, min_t p₀) for each grid point.
    pub depletion_curve: Vec<(f64, f64)>,
}

/// Minimum over the first few periods of the |0⟩ population under a constant drive.
pub fn min_ground_population(p: &SystemParams) -> f64 {
    let h = hamiltonian_rwa(p, &PulseSegment::for_params(0.0, 0.0, p));
    let eig = SymmetricEigen::new(h);
    let w: Vec<f64> = (0..3).map(|k| eig.eigenvectors[(IDX_ZERO, k)].norm_sqr()).collect();
    let lam = eig.eigenvalues;
    let p0 = |t: f64| -> f64 {
        (0..3).map(|k| C64::from_polar(w[k], -lam[k] * t)).sum::<C64>().norm_sqr()
    };
    let gaps: Vec<f64> = [(0, 1), (0, 2), (1, 2)]
        .iter()
        .filter(|(a, b)| w[*a] > 1e-14 && w[*b] > 1e-14)
        .map(|(a, b)| (lam[*a] - lam[*b]).abs())
        .filter(|g| *g > 1e-9)
        .collect();
    let (Some(slow), Some(fast)) =
        (gaps.iter().copied().reduce(f64::min), gaps.iter().copied().reduce(f64::max))
    else {
        return p0(0.0);
    };
    let window = 1.1 * 2.0 * PI / slow;
    let n = ((40.0 * window * fast / (2.0 * PI)).ceil() as usize).clamp(400, 40_000);
    let dt = window / n as f64;
    let (k_best, _) = (0..=n)
        .map(|k| (k, p0(k as f64 * dt)))
        .fold((0, f64::INFINITY), |acc, (k, v)| if v < acc.1 { (k, v) } else { acc });
    // golden-section refinement on the bracketing cells
    let (mut a, mut b) = ((k_best as f64 - 1.0).max(0.0) * dt, (k_best as f64 + 1.0) * dt);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..100 {
        if p0(c) < p0(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    p0(0.5 * (a + b)).min(p0(k_best as f64 * dt))
}

/// Scans Ω_y/Ω_x and returns the ratio that best depletes |0⟩.
///
/// The grid argmin is refined by successive parabolic interpolation on the
/// continuous depletion function, bracketed by its grid neighbours (skipped
/// at the grid edges).
pub fn ratio_scan(p: &SystemParams, ratio_grid: &[f64]) -> Result<RatioScan> {
    p.validate()?;
    if p.ex == 0.0 {
        return Err(Error::InvalidInput("ratio scan needs E_x != 0".into()));
    }
    if ratio_grid.is_empty() || ratio_grid.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidInput("ratio grid must be non-empty and finite".into()));
    }
    let depletion_curve: Vec<(f64, f64)> = ratio_grid
        .par_iter()
        .map(|&r| (r, min_ground_population(&p.with_omega_y(r * p.omega_x))))
        .collect();
    let (i, _) = depletion_curve
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, (_, v))| if *v < acc.1 { (k, *v) } else { acc });
    let mut best_ratio = depletion_curve[i].0;
    if i > 0 && i + 1 < depletion_curve.len() {
        let f = |r: f64| min_ground_population(&p.with_omega_y(r * p.omega_x));
        let mut pts = [depletion_curve[i - 1], depletion_curve[i], depletion_curve[i + 1]];
        // successive parabolic interpolation on the continuous depletion
        for _ in 0..60 {
            let [(x0, y0), (x1, y1), (x2, y2)] = pts;
            let num = (x1 - x0).powi(2) * (y1 - y2) - (x1 - x2).powi(2) * (y1 - y0);
            let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
            if den == 0.0 {
                break;
            }
            let v = x1 - 0.5 * num / den;
            if !(v > x0 && v < x2) || (v - x1).abs() < 1e-12 * (1.0 + x1.abs()) {
                break;
            }
            let fv = f(v);
            pts = if fv < y1 {
                if v < x1 { [(x0, y0), (v, fv), (x1, y1)] } else { [(x1, y1), (v, fv), (x2, y2)] }
            } else if v < x1 {
                [(v, fv), (x1, y1), (x2, y2)]
            } else {
                [(x0, y0), (x1, y1), (v, fv)]
            };
        }
        best_ratio = pts[1].0;
    }
    Ok(RatioScan { best_ratio, depletion_curve })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTolerances {
    /// Convergence of the root bracketing, in time units.
    pub root: f64,
    /// Grid spacing of the ratio scan, if one was run.
    pub ratio_grid: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub carrier: f64,
    #[serde(rename = "T_total")]
    pub t_total: f64,
    #[serde(rename = "T_prime")]
    pub t_prime: f64,
    pub phi: f64,
    pub best_ratio: Option<f64>,
    pub method: Method,
    pub tolerances: CalibrationTolerances,
}

/// Full two-step calibration; the ratio scan runs only when E_x ≠ 0 and a grid is given.
pub fn calibrate(p: &SystemParams, scan: &RabiScan, method: Method, ratio_grid: &[f64]) -> Result<CalibrationReport> {
    let odmr = simulate_odmr(p);
    let best_ratio = if p.ex != 0.0 && !ratio_grid.is_empty() {
        Some(ratio_scan(p, ratio_grid)?.best_ratio)
    } else {
        None
    };
    let driven = match best_ratio {
        Some(r) => p.with_omega_y(r * p.omega_x),
        None => *p,
    };
    let est = rabi_extract(&driven, scan, method)?;
    let spacing = (ratio_grid.len() > 1).then(|| (ratio_grid[ratio_grid.len() - 1] - ratio_grid[0]).abs() / (ratio_grid.len() - 1) as f64);
    Ok(CalibrationReport {
        carrier: odmr.carrier,
        t_total: est.t_total,
        t_prime: est.t_prime,
        phi: est.phi,
        best_ratio,
        method,
        tolerances: CalibrationTolerances { root: f64::EPSILON * scan.t_max, ratio_grid: spacing },
    })
}

//! Subcommand implementations. Each returns its artifact in memory; the
//! binary decides where it goes.

use std::f64::consts::PI;

use nverc_core::erc::DQRotation;
use nverc_core::calibration::{calibrate, RabiScan};
use nverc_core::sequence::{apply_sequence, not_gate_sequence, sequence_unitary, Method, PulseSegment, PulseSequence};
use nverc_core::spin::{dq_fidelity, Frame, StateVector3, SystemParams, IDX_MINUS1, IDX_PLUS1, IDX_ZERO};
use nverc_core::strain::{compensation_ratio, effective_params, ey_characteristics, ey_validity_boundary};
use nverc_core::synth::{haar_random_su2, synthesize_gate_with, SynthesisConfig};
use nverc_core::{Mat2, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AxisConfig, Config, ConfigError, Observable, StartState, TargetConfig};
use crate::table::Table;
use crate::CliError;

/// Overrides given on the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub method: Option<Method>,
    pub seed: Option<u64>,
}

impl RunOptions {
    fn method(&self, cfg: &Config, default: Method) -> Method {
        self.method.or(cfg.method).unwrap_or(default)
    }

    fn seed(&self, cfg: &Config) -> u64 {
        self.seed.or(cfg.seed).unwrap_or(42)
    }
}

pub fn linspace(min: f64, max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![min],
        _ => (0..n)
            .map(|k| if k == n - 1 { max } else { min + (max - min) * k as f64 / (n - 1) as f64 })
            .collect(),
    }
}

fn axis_values(a: &AxisConfig) -> Vec<f64> {
    linspace(a.min, a.max, a.n)
}

/// Evaluates `f` on every cell in parallel. Results land in index order and
/// the first failing index wins, so output never depends on scheduling.
pub fn run_cells<T, F>(n: usize, f: F) -> Result<Vec<T>, CliError>
where
    T: Send,
    F: Fn(usize) -> Result<T, nverc_core::Error> + Sync,
{
    let results: Vec<Result<T, nverc_core::Error>> = (0..n).into_par_iter().map(&f).collect();
    results.into_iter().collect::<Result<Vec<T>, _>>().map_err(CliError::from)
}

fn base_table(cmd: &str, cfg: &Config, p: &SystemParams, method: Method, columns: &[&str]) -> Table {
    let mut t = Table::new(columns);
    t.meta("command", cmd).meta("units", cfg.units.label()).meta("method", method.to_string());
    t.meta("params", serde_json::to_string(p).expect("params serialize"));
    if let Some(note) = &cfg.note {
        t.meta("note", note.clone());
    }
    t
}

fn start_state(s: StartState) -> StateVector3 {
    match s {
        StartState::Plus1 => StateVector3::plus1(),
        StartState::Zero => StateVector3::zero(),
        StartState::Minus1 => StateVector3::minus1(),
    }
}

/// Populations of the NOT program (T̄′ at phase 0, then T̄″ at phase π) over [0, T̄].
pub fn cmd_trace(cfg: &Config, opts: &RunOptions) -> Result<Table, CliError> {
    let p = cfg.system_params()?;
    let method = opts.method(cfg, Method::Analytic);
    let tc = cfg.trace.clone().unwrap_or_else(|| serde_json::from_str("{}").expect("defaults"));
    let q = effective_params(&p)?.quantities()?;
    let seq = not_gate_sequence(&p)?;
    let start = start_state(tc.start);
    let times = linspace(0.0, q.t_total, tc.n_points);
    let rows = run_cells(times.len(), |k| {
        let s = apply_sequence(&p, &seq.truncated(times[k]), &start, method)?;
        let pop = s.populations();
        Ok(vec![times[k], pop[IDX_PLUS1], pop[IDX_ZERO], pop[IDX_MINUS1]])
    })?;
    let mut t = base_table("trace", cfg, &p, method, &["t", "p_plus1", "p_0", "p_minus1"]);
    t.meta("start", format!("{:?}", tc.start).to_lowercase());
    t.meta_f("T_prime", q.t_prime).meta_f("T_second", q.t_second).meta_f("T_total", q.t_total);
    t.rows = rows;
    Ok(t)
}

fn observable_name(o: Observable) -> &'static str {
    match o {
        Observable::PopPlus1 => "p_plus1",
        Observable::Pop0 => "p_0",
        Observable::PopMinus1 => "p_minus1",
        Observable::DqFidelity => "dq_fidelity",
    }
}

/// Two-pulse program U(t₂, π)·U(t₁, 0).
pub fn timing_pair(p: &SystemParams, t1: f64, t2: f64) -> PulseSequence {
    PulseSequence::new(
        vec![PulseSegment::for_params(t1, 0.0, p), PulseSegment::for_params(t2, PI, p)],
        Frame::carrier_frame(p),
    )
}

/// Robustness of the NOT gate against timing errors over (t₁, t₂) ∈ [0, T̄]².
pub fn cmd_robustness(cfg: &Config, opts: &RunOptions) -> Result<Table, CliError> {
    let p = cfg.system_params()?;
    let method = opts.method(cfg, Method::Analytic);
    let rc = cfg.robustness.clone().unwrap_or_else(|| serde_json::from_str("{}").expect("defaults"));
    if rc.n < 2 {
        return Err(ConfigError::invalid("robustness.n", format!("need n >= 2, got {}", rc.n)).into());
    }
    p.check_regime()?;
    let q = effective_params(&p)?.quantities()?;
    let grid = linspace(0.0, q.t_total, rc.n);
    let ideal = match rc.observable {
        Observable::DqFidelity => Some(sequence_unitary(&p, &not_gate_sequence(&p)?, Method::Analytic)?.dq_block()),
        _ => None,
    };
    let n = grid.len();
    let rows = run_cells(n * n, |k| {
        let (t1, t2) = (grid[k / n], grid[k % n]);
        let seq = timing_pair(&p, t1, t2);
        let value = match (rc.observable, &ideal) {
            (Observable::DqFidelity, Some(target)) => {
                dq_fidelity(target, &sequence_unitary(&p, &seq, method)?.dq_block())
            }
            (o, _) => {
                let pop = apply_sequence(&p, &seq, &StateVector3::plus1(), method)?.populations();
                match o {
                    Observable::PopPlus1 => pop[IDX_PLUS1],
                    Observable::Pop0 => pop[IDX_ZERO],
                    _ => pop[IDX_MINUS1],
                }
            }
        };
        Ok(vec![t1, t2, value])
    })?;
    let mut t = base_table("robustness", cfg, &p, method, &["t1", "t2", observable_name(rc.observable)]);
    t.meta_f("omega_over_mu_b", p.omega_eff() / p.mu_b_eff());
    t.meta_f("T_half", 0.5 * q.t_total)
        .meta_f("T_prime", q.t_prime)
        .meta_f("T_second", q.t_second)
        .meta_f("T_total", q.t_total);
    t.rows = rows;
    Ok(t)
}

/// |0⟩ population over (E_y, t) with the E_y-shortened characteristic times as overlay columns.
pub fn cmd_ey_map(cfg: &Config, opts: &RunOptions) -> Result<Table, CliError> {
    let p = cfg.system_params()?;
    let method = opts.method(cfg, Method::Analytic);
    let mc = cfg.ey_map.clone().ok_or_else(|| ConfigError::invalid("ey_map", "section missing"))?;
    mc.ey.validate("ey_map.ey")?;
    mc.t.validate("ey_map.t")?;
    if mc.t.min < 0.0 {
        return Err(ConfigError::invalid("ey_map.t", "times must be >= 0").into());
    }
    let eys = axis_values(&mc.ey);
    let ts = axis_values(&mc.t);
    let nt = ts.len();
    let rows = run_cells(eys.len() * nt, |k| {
        let (ey_cfg, t) = (eys[k / nt], ts[k % nt]);
        let pe = SystemParams { ey: cfg.freq(ey_cfg), ..p };
        let seq = PulseSequence::new(vec![PulseSegment::for_params(t, 0.0, &pe)], Frame::carrier_frame(&pe));
        let p0 = apply_sequence(&pe, &seq, &StateVector3::zero(), method)?.populations()[IDX_ZERO];
        let (tt, tp, ts2) = match ey_characteristics(&pe) {
            Ok(q) => (q.t_total, q.t_prime, q.t_second),
            Err(_) => (f64::NAN, f64::NAN, f64::NAN),
        };
        Ok(vec![ey_cfg, t, p0, tt, tp, ts2])
    })?;
    let mut t = base_table("ey-map", cfg, &p, method, &["ey", "t", "p_0", "T_total", "T_prime", "T_second"]);
    if let Some(b) = ey_validity_boundary(p.mu_b, p.omega_x) {
        t.meta_f("ey_boundary", b / cfg.freq(1.0));
    }
    t.rows = rows;
    Ok(t)
}

/// |0⟩ population over (Ω_y/Ω_x, t) in presence of E_x.
pub fn cmd_ratio_map(cfg: &Config, opts: &RunOptions) -> Result<Table, CliError> {
    let p = cfg.system_params()?;
    let method = opts.method(cfg, Method::RwaNumeric);
    let mc = cfg.ratio_map.clone().ok_or_else(|| ConfigError::invalid("ratio_map", "section missing"))?;
    mc.ratio.validate("ratio_map.ratio")?;
    mc.t.validate("ratio_map.t")?;
    if mc.t.min < 0.0 {
        return Err(ConfigError::invalid("ratio_map.t", "times must be >= 0").into());
    }
    let ratios = axis_values(&mc.ratio);
    let ts = axis_values(&mc.t);
    let nt = ts.len();
    let rows = run_cells(ratios.len() * nt, |k| {
        let (r, t) = (ratios[k / nt], ts[k % nt]);
        let pr = p.with_omega_y(r * p.omega_x);
        let seq = PulseSequence::new(vec![PulseSegment::for_params(t, 0.0, &pr)], Frame::carrier_frame(&pr));
        let p0 = apply_sequence(&pr, &seq, &StateVector3::zero(), method)?.populations()[IDX_ZERO];
        Ok(vec![r, t, p0])
    })?;
    let mut t = base_table("ratio-map", cfg, &p, method, &["ratio", "t", "p_0"]);
    if p.ex != 0.0 {
        let r = compensation_ratio(p.ex, p.ey)?;
        t.meta_f("analytic_ratio", r);
        if let Ok(q) = effective_params(&p.with_omega_y(r * p.omega_x)).and_then(|e| e.quantities()) {
            t.meta_f("T_prime", q.t_prime).meta_f("T_second", q.t_second).meta_f("T_total", q.t_total);
        }
    }
    t.rows = rows;
    Ok(t)
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodFigures {
    pub analytic: f64,
    pub rwa: f64,
    pub lab: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthReport {
    pub target: [[[f64; 2]; 2]; 2],
    pub rotations: Vec<DQRotation>,
    pub n_rotations: usize,
    pub total_duration: f64,
    pub fidelity: MethodFigures,
    pub leakage: MethodFigures,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    /// Pulse program as a `nverc-seq/1` document.
    pub sequence_json: String,
    pub report: SynthReport,
}

/// Resolves a preset name or explicit entries to a 2×2 unitary on (|+1⟩, |−1⟩).
pub fn parse_target(t: &TargetConfig, seed: u64) -> Result<Mat2, ConfigError> {
    let c = |re: f64, im: f64| C64::new(re, im);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let m = match t {
        TargetConfig::Preset(name) => match name.as_str() {
            "I" => Mat2::identity(),
            "X" => Mat2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)),
            "Y" => Mat2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)),
            "Z" => Mat2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)),
            "H" => Mat2::new(c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)),
            "random" => haar_random_su2(&mut ChaCha8Rng::seed_from_u64(seed)),
            other => {
                return Err(ConfigError::invalid(
                    "synth.target",
                    format!("unknown preset {other:?} (I, X, Y, Z, H, random)"),
                ))
            }
        },
        TargetConfig::Matrix { re, im } => {
            Mat2::new(c(re[0][0], im[0][0]), c(re[0][1], im[0][1]), c(re[1][0], im[1][0]), c(re[1][1], im[1][1]))
        }
    };
    let defect = (m.adjoint() * m - Mat2::identity()).norm();
    if !(defect <= 1e-10) {
        return Err(ConfigError::invalid("synth.target", format!("not unitary (defect {defect:e})")));
    }
    Ok(m)
}

/// Synthesizes the configured target and cross-checks the program numerically.
pub fn cmd_synth(cfg: &Config, opts: &RunOptions) -> Result<SynthOutput, CliError> {
    let p = cfg.system_params()?;
    let sc = cfg.synth.clone().ok_or_else(|| ConfigError::invalid("synth", "section missing"))?;
    let seed = opts.seed(cfg);
    let target = parse_target(&sc.target, seed)?;
    let scfg = SynthesisConfig { seed, max_rotations: sc.max_rotations, ..SynthesisConfig::default() };
    let out = synthesize_gate_with(&p, &target, &scfg)?;
    let rwa = sequence_unitary(&p, &out.sequence, Method::RwaNumeric)?;
    let lab = if sc.lab_check { Some(sequence_unitary(&p, &out.sequence, Method::LabNumeric)?) } else { None };
    let entries = |f: fn(&C64) -> f64| [[f(&target[(0, 0)]), f(&target[(0, 1)])], [f(&target[(1, 0)]), f(&target[(1, 1)])]];
    let report = SynthReport {
        target: [entries(|z| z.re), entries(|z| z.im)],
        n_rotations: out.rotations.len(),
        rotations: out.rotations.clone(),
        total_duration: out.sequence.total_duration(),
        fidelity: MethodFigures {
            analytic: out.fidelity,
            rwa: dq_fidelity(&target, &rwa.dq_block()),
            lab: lab.as_ref().map(|u| dq_fidelity(&target, &u.dq_block())),
        },
        leakage: MethodFigures { analytic: out.leakage, rwa: rwa.leakage(), lab: lab.as_ref().map(|u| u.leakage()) },
    };
    Ok(SynthOutput { sequence_json: out.sequence.to_json(&p), report })
}

/// ODMR + Rabi calibration, plus the drive-ratio scan when E_x ≠ 0.
pub fn cmd_calibrate(cfg: &Config, opts: &RunOptions) -> Result<String, CliError> {
    let p = cfg.system_params()?;
    let method = opts.method(cfg, Method::Analytic);
    let cc = cfg.calibrate.clone().unwrap_or_else(|| serde_json::from_str("{}").expect("defaults"));
    let mut scan = RabiScan::covering(&p);
    if let Some(t) = cc.t_max {
        scan.t_max = t;
    }
    scan.n_points = cc.n_points;
    let grid = match &cc.ratio_grid {
        Some(a) => {
            a.validate("calibrate.ratio_grid")?;
            axis_values(a)
        }
        None => Vec::new(),
    };
    let report = calibrate(&p, &scan, method, &grid)?;
    Ok(serde_json::to_string_pretty(&report).expect("report serializes"))
}

/// Matplotlib script that draws a CSV written by one of the sweeps.
pub fn plot_script(csv_name: &str, columns: &[String]) -> String {
    let two_d = columns.len() >= 3 && matches!(columns[0].as_str(), "t1" | "ey" | "ratio");
    let body = if two_d {
        format!(
            "x, y, z = d[:, 0], d[:, 1], d[:, 2]\n\
             nx = len(np.unique(x)); ny = len(np.unique(y))\n\
             plt.pcolormesh(np.unique(y), np.unique(x), z.reshape(nx, ny), shading='auto')\n\
             plt.xlabel('{}'); plt.ylabel('{}'); plt.colorbar(label='{}')\n",
            columns[1], columns[0], columns[2]
        )
    } else {
        let mut s = String::new();
        for (k, c) in columns.iter().enumerate().skip(1) {
            s.push_str(&format!("plt.plot(d[:, 0], d[:, {k}], label='{c}')\n"));
        }
        s.push_str(&format!("plt.xlabel('{}'); plt.legend()\n", columns[0]));
        s
    };
    format!(
        "import numpy as np\nimport matplotlib.pyplot as plt\n\n\
         lines = [l for l in open('{csv_name}') if not l.startswith('#')]\n\
         d = np.loadtxt(lines[1:], delimiter=',', ndmin=2)\n{body}\
         plt.savefig('{csv_name}.png', dpi=150)\n"
    )
}

//! Pulse programs and the execution engine that runs them analytically or
//! through the numerical propagator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagator::{propagate, IntegratorConfig};
use crate::spin::{Frame, StateVector3, SystemParams, Unitary3};
use crate::strain::effective_params;

pub const SEQUENCE_SCHEMA: &str = "nverc-seq/1";

/// Constant-amplitude, constant-phase drive segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSegment {
    pub duration: f64,
    /// Phase of the x drive.
    pub alpha: f64,
    /// Phase of the y drive.
    pub beta: f64,
    pub omega_x: f64,
    pub omega_y: f64,
}

impl PulseSegment {
    /// x-only drive; `beta` follows `alpha`.
    pub fn new(duration: f64, alpha: f64, omega_x: f64) -> Self {
        Self { duration, alpha, beta: alpha, omega_x, omega_y: 0.0 }
    }

    /// Segment with the drive amplitudes of `p` and `beta = alpha`.
    pub fn for_params(duration: f64, alpha: f64, p: &SystemParams) -> Self {
        Self { duration, alpha, beta: alpha, omega_x: p.omega_x, omega_y: p.omega_y }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(Error::InvalidInput(format!("segment duration must be finite and >= 0, got {}", self.duration)));
        }
        if ![self.alpha, self.beta, self.omega_x, self.omega_y].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("segment phases and amplitudes must be finite".into()));
        }
        Ok(())
    }

    /// Parameters with this segment's drive amplitudes.
    pub fn drive_params(&self, p: &SystemParams) -> SystemParams {
        SystemParams { omega_x: self.omega_x, omega_y: self.omega_y, ..*p }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub segments: Vec<PulseSegment>,
    pub frame: Frame,
}

impl PulseSequence {
    pub fn new(segments: Vec<PulseSegment>, frame: Frame) -> Self {
        Self { segments, frame }
    }

    pub fn empty(frame: Frame) -> Self {
        Self { segments: Vec::new(), frame }
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn extend(&mut self, other: &PulseSequence) {
        self.segments.extend_from_slice(&other.segments);
    }

    /// The program cut at time `t` (the segment straddling `t` is shortened).
    pub fn truncated(&self, t: f64) -> PulseSequence {
        let mut out = Vec::new();
        let mut elapsed = 0.0;
        for s in &self.segments {
            if elapsed >= t {
                break;
            }
            let d = s.duration.min(t - elapsed);
            out.push(PulseSegment { duration: d, ..*s });
            elapsed += s.duration;
        }
        PulseSequence { segments: out, frame: self.frame }
    }

    pub fn to_document(&self, params: &SystemParams) -> SequenceDocument {
        SequenceDocument {
            schema: SEQUENCE_SCHEMA.to_string(),
            frame: self.frame,
            params: *params,
            segments: self.segments.clone(),
        }
    }

    pub fn to_json(&self, params: &SystemParams) -> String {
        serde_json::to_string_pretty(&self.to_document(params)).expect("sequence document serializes")
    }

    /// Parses a JSON document and returns the sequence with its header parameters.
    pub fn from_json(text: &str) -> Result<(PulseSequence, SystemParams)> {
        let doc: SequenceDocument =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("sequence JSON: {e}")))?;
        if doc.schema != SEQUENCE_SCHEMA {
            return Err(Error::InvalidInput(format!("unsupported schema {:?}, expected {SEQUENCE_SCHEMA}", doc.schema)));
        }
        for s in &doc.segments {
            s.validate()?;
        }
        doc.params.validate()?;
        Ok((PulseSequence { segments: doc.segments, frame: doc.frame }, doc.params))
    }
}

/// On-disk form of a [`PulseSequence`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceDocument {
    pub schema: String,
    pub frame: Frame,
    pub params: SystemParams,
    pub segments: Vec<PulseSegment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Closed-form pulse unitaries.
    #[serde(rename = "analytic")]
    Analytic,
    /// Exact exponentials of the rotating-frame Hamiltonian.
    #[serde(rename = "rwa")]
    RwaNumeric,
    /// Time-dependent integration of the lab-frame Hamiltonian.
    #[serde(rename = "lab")]
    LabNumeric,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Method::Analytic),
            "rwa" | "rwa_numeric" => Ok(Method::RwaNumeric),
            "lab" | "lab_numeric" => Ok(Method::LabNumeric),
            other => Err(Error::InvalidInput(format!("unknown method {other:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Analytic => "analytic",
            Method::RwaNumeric => "rwa",
            Method::LabNumeric => "lab",
        })
    }
}

/// Closed-form unitary of one segment in the carrier frame.
///
/// Requires `beta == alpha` and a drive ratio that keeps the Raman
/// resonance; both hold trivially without the y drive and E_x.
pub fn analytic_segment_unitary(p: &SystemParams, seg: &PulseSegment) -> Result<Unitary3> {
    seg.validate()?;
    if seg.omega_y != 0.0 && (seg.beta - seg.alpha).abs() > 1e-12 {
        return Err(Error::Resonance {
            residual: (seg.beta - seg.alpha).abs(),
            detail: "closed form needs beta == alpha".into(),
        });
    }
    let eff = effective_params(&seg.drive_params(p))?;
    Ok(eff.erc_unitary(seg.duration, seg.alpha))
}

/// Product of closed-form segment unitaries, first segment acting first.
pub fn analytic_sequence_unitary(p: &SystemParams, seq: &PulseSequence) -> Result<Unitary3> {
    let mut u = Unitary3::identity(Frame::carrier_frame(p));
    for s in &seq.segments {
        u = analytic_segment_unitary(p, s)?.then_after(&u);
    }
    Ok(u)
}

/// Evolution operator of the whole program in the carrier frame.
pub fn sequence_unitary(p: &SystemParams, seq: &PulseSequence, method: Method) -> Result<Unitary3> {
    sequence_unitary_with(p, seq, method, &IntegratorConfig::default())
}

pub fn sequence_unitary_with(
    p: &SystemParams,
    seq: &PulseSequence,
    method: Method,
    cfg: &IntegratorConfig,
) -> Result<Unitary3> {
    p.validate()?;
    let carrier = Frame::carrier_frame(p);
    match method {
        Method::Analytic => analytic_sequence_unitary(p, seq),
        Method::RwaNumeric => Ok(propagate(p, seq, &StateVector3::zero(), carrier, cfg)?.unitary),
        Method::LabNumeric => {
            let run = propagate(p, seq, &StateVector3::zero(), Frame::Lab, cfg)?;
            Ok(crate::propagator::frame_transform_unitary(&run.unitary, 0.0, seq.total_duration(), carrier, p))
        }
    }
}

/// Runs `seq` on `s` and returns the final state in the carrier frame.
pub fn apply_sequence(p: &SystemParams, seq: &PulseSequence, s: &StateVector3, method: Method) -> Result<StateVector3> {
    if seq.is_empty() {
        return Ok(*s);
    }
    Ok(sequence_unitary(p, seq, method)?.apply(s))
}

pub fn apply_sequence_with(
    p: &SystemParams,
    seq: &PulseSequence,
    s: &StateVector3,
    method: Method,
    cfg: &IntegratorConfig,
) -> Result<StateVector3> {
    if seq.is_empty() {
        return Ok(*s);
    }
    Ok(sequence_unitary_with(p, seq, method, cfg)?.apply(s))
}

/// The two-pulse NOT program: (T̄′, phase 0) then (T̄″, phase π).
pub fn not_gate_sequence(p: &SystemParams) -> Result<PulseSequence> {
    let q = crate::strain::effective_params(p)?.quantities()?;
    Ok(PulseSequence::new(
        vec![
            PulseSegment::for_params(q.t_prime, 0.0, p),
            PulseSegment::for_params(q.t_second, std::f64::consts::PI, p),
        ],
        Frame::carrier_frame(p),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::IDX_MINUS1;

    #[test]
    fn empty_sequence_leaves_state() {
        let p = SystemParams::reduced(3.0);
        let s = StateVector3::plus();
        for m in [Method::Analytic, Method::RwaNumeric, Method::LabNumeric] {
            let out = apply_sequence(&p, &PulseSequence::empty(Frame::InteractionD), &s, m).unwrap();
            assert_eq!(out, s);
        }
    }

    #[test]
    fn not_gate_analytic() {
        let p = SystemParams::reduced(3.0);
        let seq = not_gate_sequence(&p).unwrap();
        let out = apply_sequence(&p, &seq, &StateVector3::plus1(), Method::Analytic).unwrap();
        assert!((out.populations()[IDX_MINUS1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_cuts_inside_segment() {
        let seq = PulseSequence::new(
            vec![PulseSegment::new(1.0, 0.0, 3.0), PulseSegment::new(2.0, 1.0, 3.0)],
            Frame::InteractionD,
        );
        let t = seq.truncated(1.5);
        assert_eq!(t.segments.len(), 2);
        assert!((t.total_duration() - 1.5).abs() < 1e-15);
        assert_eq!(seq.truncated(0.0).segments.len(), 0);
        assert_eq!(seq.truncated(10.0), seq);
    }

    #[test]
    fn json_round_trip_and_schema_check() {
        let p = SystemParams::reduced(3.0).with_fields(0.1, -0.2, 0.05);
        let seq = not_gate_sequence(&SystemParams::reduced(3.0)).unwrap();
        let text = seq.to_json(&p);
        assert!(text.contains("\"schema\": \"nverc-seq/1\""));
        assert!(text.contains("\"frame\": \"interaction-D\""));
        for key in ["duration", "alpha", "beta", "omega_x", "omega_y"] {
            assert!(text.contains(key));
        }
        let (back, bp) = PulseSequence::from_json(&text).unwrap();
        assert_eq!(back, seq);
        assert_eq!(bp, p);
        let bad = text.replace("nverc-seq/1", "nverc-seq/9");
        assert!(PulseSequence::from_json(&bad).is_err());
    }

    #[test]
    fn method_parsing() {
        assert_eq!("analytic".parse::<Method>().unwrap(), Method::Analytic);
        assert_eq!("rwa".parse::<Method>().unwrap(), Method::RwaNumeric);
        assert_eq!("lab".parse::<Method>().unwrap(), Method::LabNumeric);
        assert!("magic".parse::<Method>().is_err());
    }

    #[test]
    fn analytic_rejects_phase_mismatch_with_y_drive() {
        let p = SystemParams::reduced(3.0);
        let seg = PulseSegment { duration: 1.0, alpha: 0.0, beta: 0.5, omega_x: 3.0, omega_y: 1.0 };
        assert!(matches!(analytic_segment_unitary(&p, &seg), Err(Error::Resonance { .. })));
    }
}

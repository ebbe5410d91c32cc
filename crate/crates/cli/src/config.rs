//! JSON run configuration.
//!
//! Frequencies are given either directly in units of μB (`"units":
//! "dimensionless"`, taken as angular rates) or as ordinary frequencies in MHz
//! (`"units": "mhz"`, multiplied by 2π; times then come out in μs).

use std::f64::consts::PI;
use std::path::Path;

use nverc_core::sequence::Method;
use nverc_core::spin::SystemParams;
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl ConfigError {
    pub fn invalid(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid { field: field.to_string(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Dimensionless,
    Mhz,
}

impl Units {
    fn scale(self) -> f64 {
        match self {
            Units::Dimensionless => 1.0,
            Units::Mhz => 2.0 * PI,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Units::Dimensionless => "dimensionless",
            Units::Mhz => "mhz",
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default = "default_d")]
    pub d: f64,
    #[serde(default = "one")]
    pub mu_b: f64,
    pub omega_x: f64,
    #[serde(default)]
    pub omega_y: f64,
    #[serde(default)]
    pub ex: f64,
    #[serde(default)]
    pub ey: f64,
    #[serde(default)]
    pub ez: f64,
}

fn default_d() -> f64 {
    500.0
}

fn one() -> f64 {
    1.0
}

/// Inclusive linear grid.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl AxisConfig {
    pub fn validate(&self, field: &str) -> Result<(), ConfigError> {
        if !(self.min.is_finite() && self.max.is_finite()) || self.max < self.min {
            return Err(ConfigError::invalid(field, format!("need finite min <= max, got [{}, {}]", self.min, self.max)));
        }
        if self.n < 2 {
            return Err(ConfigError::invalid(field, format!("need n >= 2, got {}", self.n)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartState {
    #[default]
    Plus1,
    Zero,
    Minus1,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    #[serde(default)]
    pub start: StartState,
    #[serde(default = "default_trace_points")]
    pub n_points: usize,
}

fn default_trace_points() -> usize {
    401
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    PopPlus1,
    #[serde(rename = "pop_0")]
    Pop0,
    #[default]
    PopMinus1,
    DqFidelity,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessConfig {
    #[serde(default = "default_robustness_n")]
    pub n: usize,
    #[serde(default)]
    pub observable: Observable,
}

fn default_robustness_n() -> usize {
    129
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EyMapConfig {
    pub ey: AxisConfig,
    pub t: AxisConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioMapConfig {
    pub ratio: AxisConfig,
    pub t: AxisConfig,
}

/// Target of a synthesis run: a preset name or explicit matrix entries.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum TargetConfig {
    Preset(String),
    Matrix { re: [[f64; 2]; 2], im: [[f64; 2]; 2] },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub target: TargetConfig,
    #[serde(default)]
    pub max_rotations: Option<usize>,
    /// Also run the lab-frame cross-check (slow for long programs).
    #[serde(default = "yes")]
    pub lab_check: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default = "default_scan_points")]
    pub n_points: usize,
    #[serde(default)]
    pub ratio_grid: Option<AxisConfig>,
}

fn default_scan_points() -> usize {
    256
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub units: Units,
    pub params: ParamsConfig,
    #[serde(default)]
    pub method: Option<Method>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Free-form remark copied into the output metadata.
    #[serde(default)]
    pub note: Option<String>,
    #[serde(default)]
    pub plot: bool,
    #[serde(default)]
    pub trace: Option<TraceConfig>,
    #[serde(default)]
    pub robustness: Option<RobustnessConfig>,
    #[serde(default)]
    pub ey_map: Option<EyMapConfig>,
    #[serde(default)]
    pub ratio_map: Option<RatioMapConfig>,
    #[serde(default)]
    pub synth: Option<SynthConfig>,
    #[serde(default)]
    pub calibrate: Option<CalibrateConfig>,
}

impl Config {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_str_named(&text, &path.display().to_string())
    }

    pub fn from_str_named(text: &str, name: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|source| ConfigError::Parse { path: name.to_string(), source })
    }

    /// Frequency in the internal angular units.
    pub fn freq(&self, v: f64) -> f64 {
        v * self.units.scale()
    }

    pub fn system_params(&self) -> Result<SystemParams, ConfigError> {
        let c = &self.params;
        let p = SystemParams {
            d: self.freq(c.d),
            mu_b: self.freq(c.mu_b),
            omega_x: self.freq(c.omega_x),
            omega_y: self.freq(c.omega_y),
            ex: self.freq(c.ex),
            ey: self.freq(c.ey),
            ez: self.freq(c.ez),
        };
        p.validate().map_err(|e| ConfigError::invalid("params", e.to_string()))?;
        Ok(p)
    }
}

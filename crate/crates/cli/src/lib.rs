//! Sweep engine and command-line front end for NV-ERC control: figure-style
//! datasets, gate synthesis and simulated calibration.

pub mod commands;
pub mod config;
pub mod table;

use serde::Serialize;

pub use commands::RunOptions;
pub use config::{Config, ConfigError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] nverc_core::Error),
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
}

impl CliError {
    /// 2: configuration, 3: regime or domain, 4: numerical failure.
    pub fn exit_code(&self) -> i32 {
        use nverc_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Output { .. } => 2,
            CliError::Core(e) => match e {
                E::InvalidInput(_) => 2,
                E::Regime { .. } | E::Domain(_) | E::Resonance { .. } | E::AxisDegenerate { .. } | E::Extraction(_) => 3,
                E::NoConvergence { .. } | E::StepSizeUnderflow { .. } => 4,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        use nverc_core::Error as E;
        match self {
            CliError::Config(_) => "config",
            CliError::Output { .. } => "output",
            CliError::Core(e) => match e {
                E::InvalidInput(_) => "invalid_input",
                E::Regime { .. } => "regime",
                E::Domain(_) => "domain",
                E::Resonance { .. } => "resonance",
                E::AxisDegenerate { .. } => "axis_degenerate",
                E::Extraction(_) => "extraction",
                E::NoConvergence { .. } => "no_convergence",
                E::StepSizeUnderflow { .. } => "step_size_underflow",
            },
        }
    }

    /// One-line JSON description for scripts.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            error: &'a str,
            exit_code: i32,
            message: String,
        }
        serde_json::to_string(&Doc { error: self.kind(), exit_code: self.exit_code(), message: self.to_string() })
            .expect("error serializes")
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The drive is too weak for the effective Raman coupling to fully deplete `|0⟩`.
    #[error("ERC regime violated: drive {omega} < 2·{mu_b}; need omega >= {min_omega}")]
    Regime { omega: f64, mu_b: f64, min_omega: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    /// The drive ratio does not restore the Raman resonance in presence of E_x.
    #[error("Raman resonance not restored: residual {residual:e} ({detail})")]
    Resonance { residual: f64, detail: String },

    #[error("rotation axes are effectively parallel (separation {separation:e} rad <= {threshold:e})")]
    AxisDegenerate { separation: f64, threshold: f64 },

    #[error("gate synthesis did not converge: best infidelity {residual:e} after {attempts} ansätze")]
    NoConvergence { residual: f64, attempts: usize },

    #[error("integrator step size underflow at t = {t_reached}")]
    StepSizeUnderflow { t_reached: f64 },

    #[error("extraction failed: {0}")]
    Extraction(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("drive has no avoided crossings (|2πδ| = {detuning:.6e} rad/s, A·ωs = {sweep_amplitude:.6e} rad/s)")]
    NoCrossing { detuning: f64, sweep_amplitude: f64 },

    #[error("t = {time:.9e} s is not a crossing (residual detuning {residual:.3e} rad/s)")]
    NotACrossing { time: f64, residual: f64 },

    #[error("adiabatic frame undefined at t = {time:.9e} s: coupling and detuning both vanish")]
    DegenerateFrame { time: f64 },

    #[error("accuracy target {target:.1e} not reachable above minimum step {min_dt:.3e} s")]
    StepTooCoarse { target: f64, min_dt: f64 },

    #[error("{axis} ladder truncation reaches only {coverage:.6} of the Boltzmann weight at n = {n_max}")]
    TruncationTooSmall { axis: &'static str, n_max: usize, coverage: f64 },

    #[error("traces do not share a sample grid (trace {index})")]
    MismatchedGrids { index: usize },

    #[error("trace too sparse: window {window} holds {samples} samples, need at least {required}")]
    TooSparse { window: usize, samples: usize, required: usize },

    #[error("fit diverged after {iterations} iterations: {reason}")]
    FitDiverged { iterations: usize, reason: String },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

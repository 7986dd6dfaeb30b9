//! Landau-Zener Rabi oscillations of a frequency-modulated two-level clock
//! transition: exact propagation, the adiabatic-impulse model, lattice
//! thermal ensembles, laser drift and the contrast analysis built on them.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod drift;
pub mod error;
pub mod experiment;
pub mod lattice;
pub mod lzsm;
pub mod model;
pub mod propagator;
pub mod special;

pub use analysis::{fit_exponential, fit_linear, fringe_contrast, ContrastSeries, FitResult};
pub use drift::{drift_offset, sample_shot_offset, DriftModel};
pub use error::{Error, Result};
pub use experiment::{preset, run_scenario, to_adiabatic, Basis, Motion, ScanAxis, ScanResult, Scenario};
pub use lattice::{coupling_strength, thermal_weights, LatticeConfig, MotionalMode};
pub use lzsm::{interference_extrema, p_lz, per_period_transfer, stokes_phase, transfer_matrix_trace};
pub use model::{crossing_times, effective_detuning, eigen_frame, DriveParams, EigenFrame, QubitState};
pub use propagator::{choose_step, evolve_trace, step, StepControl, Trace, TraceSample};

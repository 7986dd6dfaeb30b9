//! Motional-state coupling renormalization and thermal ensembles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagator::{Trace, TraceSample};
use crate::special::laguerre_table;

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Minimum fraction of the Boltzmann weight the truncated grid must hold.
pub const REQUIRED_COVERAGE: f64 = 0.999;

/// Levels added per truncation extension.
const EXTENSION_STEP: usize = 10;

/// Highest motional level considered on either axis.
pub const MAX_LEVEL: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionalMode {
    pub n_z: usize,
    pub n_x: usize,
    pub weight: f64,
    /// Renormalized coupling `g_n`, Hz. Sign is kept.
    pub coupling: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    /// Longitudinal Lamb-Dicke parameter.
    pub eta_z: f64,
    /// Transverse Lamb-Dicke parameter.
    pub eta_x: f64,
    /// Axial temperature, K.
    pub temp_z: f64,
    /// Radial temperature, K.
    pub temp_x: f64,
    /// Axial trap frequency, Hz.
    pub trap_freq_z: f64,
    /// Radial trap frequency, Hz.
    pub trap_freq_x: f64,
    /// Initial ladder truncation; extended automatically until coverage holds.
    pub n_max_z: usize,
    pub n_max_x: usize,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig {
            eta_z: 0.25,
            eta_x: 0.022,
            temp_z: 4.7e-6,
            temp_x: 6.3e-6,
            trap_freq_z: 65e3,
            trap_freq_x: 450.0,
            n_max_z: 0,
            n_max_x: 0,
        }
    }
}

impl LatticeConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, eta) in [("eta_z", self.eta_z), ("eta_x", self.eta_x)] {
            if !(0.0..1.0).contains(&eta) {
                return Err(Error::invalid(name, format!("must lie in [0, 1), got {eta}")));
            }
        }
        for (name, v) in [
            ("temp_z", self.temp_z),
            ("temp_x", self.temp_x),
            ("trap_freq_z", self.trap_freq_z),
            ("trap_freq_x", self.trap_freq_x),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Boltzmann ratio `exp(−h·f_z/(k_B·T_z))` between adjacent axial levels.
    pub fn ratio_z(&self) -> f64 {
        boltzmann_ratio(self.trap_freq_z, self.temp_z)
    }

    pub fn ratio_x(&self) -> f64 {
        boltzmann_ratio(self.trap_freq_x, self.temp_x)
    }
}

pub fn boltzmann_ratio(trap_freq: f64, temperature: f64) -> f64 {
    (-PLANCK * trap_freq / (BOLTZMANN * temperature)).exp()
}

/// `g·L_{n_z}(η_z²)·L_{n_x}(η_x²)·e^{−η_z²/2}·e^{−η_x²/2}`.
pub fn coupling_strength(g_bare: f64, mode: (usize, usize), config: &LatticeConfig) -> f64 {
    let (n_z, n_x) = mode;
    let (xz, xx) = (config.eta_z * config.eta_z, config.eta_x * config.eta_x);
    g_bare * laguerre_table(n_z, xz)[n_z] * laguerre_table(n_x, xx)[n_x] * (-0.5 * (xz + xx)).exp()
}

/// Smallest truncation `≥ start` (in steps of 10) whose geometric weight
/// coverage `1 − r^{n+1}` reaches `target`.
fn truncate_axis(axis: &'static str, ratio: f64, start: usize, target: f64) -> Result<usize> {
    let coverage = |n: usize| 1.0 - ratio.powf(n as f64 + 1.0);
    let mut n = start;
    while coverage(n) < target {
        if n >= MAX_LEVEL {
            return Err(Error::TruncationTooSmall { axis, n_max: MAX_LEVEL, coverage: coverage(MAX_LEVEL) });
        }
        n = (n + EXTENSION_STEP).min(MAX_LEVEL);
    }
    Ok(n)
}

fn axis_weights(ratio: f64, n_max: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..=n_max).map(|n| ratio.powf(n as f64)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Separable thermal distribution over `(n_z, n_x)` with per-mode couplings.
///
/// Modes come out in row-major `(n_z, n_x)` order.
pub fn thermal_weights(config: &LatticeConfig, g_bare: f64) -> Result<Vec<MotionalMode>> {
    config.validate()?;
    // per-axis share of the allowed loss, so the product covers REQUIRED_COVERAGE
    let per_axis = REQUIRED_COVERAGE.sqrt();
    let n_z = truncate_axis("axial", config.ratio_z(), config.n_max_z, per_axis)?;
    let n_x = truncate_axis("radial", config.ratio_x(), config.n_max_x, per_axis)?;

    let wz = axis_weights(config.ratio_z(), n_z);
    let wx = axis_weights(config.ratio_x(), n_x);
    let (xz, xx) = (config.eta_z * config.eta_z, config.eta_x * config.eta_x);
    let lz = laguerre_table(n_z, xz);
    let lx = laguerre_table(n_x, xx);
    let envelope = g_bare * (-0.5 * (xz + xx)).exp();

    let mut modes = Vec::with_capacity((n_z + 1) * (n_x + 1));
    for (iz, (&w_z, &l_z)) in wz.iter().zip(&lz).enumerate() {
        for (ix, (&w_x, &l_x)) in wx.iter().zip(&lx).enumerate() {
            modes.push(MotionalMode { n_z: iz, n_x: ix, weight: w_z * w_x, coupling: envelope * l_z * l_x });
        }
    }
    Ok(modes)
}

/// A coupling value standing in for a group of modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingBin {
    pub weight: f64,
    /// Weight-averaged `|g_n|` of the group, Hz.
    pub coupling: f64,
}

/// Groups modes into at most `bins` equal-weight quantiles of `|g_n|`.
///
/// The dynamics depend on `|g_n|` only, so modes are sorted by it and each
/// quantile is represented by its weighted mean. `bins == 0` keeps every
/// mode as its own bin.
pub fn compress_modes(modes: &[MotionalMode], bins: usize) -> Vec<CouplingBin> {
    let mut sorted: Vec<(f64, f64)> = modes.iter().map(|m| (m.coupling.abs(), m.weight)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if bins == 0 || bins >= sorted.len() {
        return sorted.into_iter().map(|(coupling, weight)| CouplingBin { weight, coupling }).collect();
    }
    let total: f64 = sorted.iter().map(|m| m.1).sum();
    let mut acc = vec![(0.0, 0.0); bins];
    let mut cumulative = 0.0;
    for (g, w) in sorted {
        // bin chosen by the mode's cumulative-weight midpoint
        let centre = (cumulative + 0.5 * w) / total;
        cumulative += w;
        let idx = ((centre * bins as f64) as usize).min(bins - 1);
        acc[idx].0 += w;
        acc[idx].1 += w * g;
    }
    acc.into_iter()
        .filter(|(w, _)| *w > 0.0)
        .map(|(w, wg)| CouplingBin { weight: w, coupling: wg / w })
        .collect()
}

/// Weighted mean trace plus pointwise weighted standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleTrace {
    pub mean: Trace,
    pub p_e_std: Vec<f64>,
    pub p_plus_std: Vec<f64>,
}

/// Pointwise weighted average of traces sharing one sample grid.
pub fn ensemble_average(traces: &[(f64, Trace)]) -> Result<EnsembleTrace> {
    let Some((_, first)) = traces.first() else {
        return Err(Error::invalid("traces", "ensemble is empty"));
    };
    let total: f64 = traces.iter().map(|(w, _)| *w).sum();
    if traces.iter().any(|(w, _)| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("weights", format!("must be non-negative and sum to 1, sum = {total}")));
    }
    let grid = first.times();
    for (index, (_, tr)) in traces.iter().enumerate() {
        if tr.len() != grid.len() || tr.samples.iter().zip(&grid).any(|(s, t)| s.t != *t) {
            return Err(Error::MismatchedGrids { index });
        }
    }

    let n = grid.len();
    let mut mean_e = vec![0.0; n];
    let mut mean_p = vec![0.0; n];
    for (w, tr) in traces {
        for (k, s) in tr.samples.iter().enumerate() {
            mean_e[k] += w * s.p_e;
            mean_p[k] += w * s.p_plus;
        }
    }
    let mut var_e = vec![0.0; n];
    let mut var_p = vec![0.0; n];
    for (w, tr) in traces {
        for (k, s) in tr.samples.iter().enumerate() {
            var_e[k] += w * (s.p_e - mean_e[k]).powi(2);
            var_p[k] += w * (s.p_plus - mean_p[k]).powi(2);
        }
    }
    let samples = grid
        .iter()
        .zip(mean_e.iter().zip(&mean_p))
        .map(|(&t, (&p_e, &p_plus))| TraceSample { t, p_e: p_e.clamp(0.0, 1.0), p_plus: p_plus.clamp(0.0, 1.0) })
        .collect();
    Ok(EnsembleTrace {
        mean: Trace { samples },
        p_e_std: var_e.into_iter().map(f64::sqrt).collect(),
        p_plus_std: var_p.into_iter().map(f64::sqrt).collect(),
    })
}

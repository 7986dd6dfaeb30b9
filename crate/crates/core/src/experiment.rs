//! Scan harness: per-shot preparation, noisy ensemble evolution and
//! aggregation over detection time or detuning.

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::{keyed_rng, sample_shot_offset, DriftModel, PROJECTION_DOMAIN};
use crate::error::{Error, Result};
use crate::lattice::{compress_modes, coupling_strength, ensemble_average, thermal_weights, CouplingBin, LatticeConfig};
use crate::model::{eigen_frame, DriveParams, QubitState};
use crate::propagator::{choose_step_over, evolve_many, StepControl, Trace, DEFAULT_ACCURACY};

/// Default atom number for projection noise when it is enabled.
pub const DEFAULT_ATOMS_PER_SHOT: u64 = 10_000;

/// Couplings evolved together per parallel work item.
const BIN_CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Motion {
    /// Bare coupling, no motional dressing.
    None,
    /// Motional ground state `(0, 0)` only.
    Ground,
    /// Thermal Boltzmann ensemble.
    Thermal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanAxis {
    DetectionTime,
    Detuning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    Diabatic,
    Adiabatic,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub drive: DriveParams,
    pub lattice: LatticeConfig,
    pub motion: Motion,
    /// Quantile bins for the thermal ensemble; 0 keeps every mode.
    pub ensemble_bins: usize,
    pub drift: DriftModel,
    /// Apply laser drift and shot jitter.
    pub noise: bool,
    pub scan_axis: ScanAxis,
    /// Detection times (s) or laser detunings (Hz), depending on `scan_axis`.
    pub scan_points: Vec<f64>,
    /// Detection time used by a detuning scan, s.
    pub detection_time: f64,
    pub shots_per_point: usize,
    /// Atoms sampled per shot for projection noise; `None` reports the mean.
    pub atoms_per_shot: Option<u64>,
    /// Wall-clock duration of one experimental cycle, s.
    pub cycle_s: f64,
    pub basis_out: Basis,
    /// Master seed. Overrides the drift model's own seed.
    pub seed: u64,
    pub accuracy: f64,
}

impl Scenario {
    /// A noise-free single-mode time scan of `drive` at the given times.
    pub fn time_scan(name: &str, drive: DriveParams, times: Vec<f64>) -> Self {
        Scenario {
            name: name.to_string(),
            drive,
            lattice: LatticeConfig::default(),
            motion: Motion::None,
            ensemble_bins: 128,
            drift: DriftModel::default(),
            noise: false,
            scan_axis: ScanAxis::DetectionTime,
            scan_points: times,
            detection_time: 0.0,
            shots_per_point: 1,
            atoms_per_shot: None,
            cycle_s: 1.5,
            basis_out: Basis::Diabatic,
            seed: 0,
            accuracy: DEFAULT_ACCURACY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.drive.validate()?;
        self.lattice.validate()?;
        self.drift.validate()?;
        if self.scan_points.is_empty() {
            return Err(Error::invalid("scan_points", "must not be empty"));
        }
        if self.scan_points.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("scan_points", "must be finite"));
        }
        if self.scan_points.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("scan_points", "must be sorted"));
        }
        if self.scan_axis == ScanAxis::DetectionTime && self.scan_points[0] < 0.0 {
            return Err(Error::invalid("scan_points", "detection times must be ≥ 0"));
        }
        if self.scan_axis == ScanAxis::Detuning && !(self.detection_time > 0.0 && self.detection_time.is_finite()) {
            return Err(Error::invalid("detection_time", format!("must be > 0, got {}", self.detection_time)));
        }
        if self.shots_per_point == 0 {
            return Err(Error::invalid("shots_per_point", "must be ≥ 1"));
        }
        if self.atoms_per_shot == Some(0) {
            return Err(Error::invalid("atoms_per_shot", "must be ≥ 1 when set"));
        }
        if !(self.cycle_s > 0.0 && self.cycle_s.is_finite()) {
            return Err(Error::invalid("cycle_s", format!("must be > 0, got {}", self.cycle_s)));
        }
        if !(self.accuracy > 0.0 && self.accuracy <= 1e-3) {
            return Err(Error::invalid("accuracy", format!("must lie in (0, 1e-3], got {}", self.accuracy)));
        }
        Ok(())
    }

    /// Coupling groups the scenario evolves, with weights summing to 1.
    pub fn coupling_bins(&self) -> Result<Vec<CouplingBin>> {
        let g = self.drive.g_bare;
        Ok(match self.motion {
            Motion::None => vec![CouplingBin { weight: 1.0, coupling: g.abs() }],
            Motion::Ground => {
                vec![CouplingBin { weight: 1.0, coupling: coupling_strength(g, (0, 0), &self.lattice).abs() }]
            }
            Motion::Thermal => {
                let modes = thermal_weights(&self.lattice, g)?;
                let mut bins = compress_modes(&modes, self.ensemble_bins);
                let total: f64 = bins.iter().map(|b| b.weight).sum();
                for b in &mut bins {
                    b.weight /= total;
                }
                bins
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    /// Detection time (s) or detuning (Hz).
    pub x: f64,
    pub p_e_mean: f64,
    pub p_plus_mean: f64,
    pub p_e_stderr: f64,
    pub p_plus_stderr: f64,
    pub shots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub points: Vec<ScanPoint>,
    pub scenario: Scenario,
    pub seed: u64,
    pub version: String,
}

impl ScanResult {
    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn p_e(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.p_e_mean).collect()
    }

    pub fn p_plus(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.p_plus_mean).collect()
    }

    /// Mean populations as a trace over the scan axis.
    pub fn trace(&self) -> Trace {
        Trace {
            samples: self
                .points
                .iter()
                .map(|p| crate::propagator::TraceSample { t: p.x, p_e: p.p_e_mean, p_plus: p.p_plus_mean })
                .collect(),
        }
    }
}

/// Ensemble-averaged `(p_e, p_plus)` at each of `times` for one laser offset.
fn ensemble_populations(
    drive: &DriveParams,
    bins: &[CouplingBin],
    offset_hz: f64,
    times: &[f64],
    dt: f64,
) -> Result<Vec<(f64, f64)>> {
    let couplings: Vec<f64> = bins.iter().map(|b| b.coupling).collect();
    let chunks: Vec<Vec<Trace>> = couplings
        .par_chunks(BIN_CHUNK)
        .map(|chunk| evolve_many(drive, chunk, offset_hz, times, dt))
        .collect::<Result<_>>()?;
    let weighted: Vec<(f64, Trace)> =
        bins.iter().map(|b| b.weight).zip(chunks.into_iter().flatten()).collect();
    let avg = ensemble_average(&weighted)?;
    Ok(avg.mean.samples.iter().map(|s| (s.p_e, s.p_plus)).collect())
}

/// Step used for the whole scenario, set by the strongest coupling and the
/// extreme laser offsets on the scan.
fn scenario_step(sc: &Scenario, bins: &[CouplingBin]) -> Result<f64> {
    let g_max = bins.iter().map(|b| b.coupling).fold(0.0, f64::max);
    let min_dt = StepControl::default().min_dt;
    let (offsets, horizon) = match sc.scan_axis {
        ScanAxis::DetectionTime => (vec![0.0], *sc.scan_points.last().unwrap_or(&0.0)),
        ScanAxis::Detuning => {
            let first = sc.scan_points[0];
            let last = *sc.scan_points.last().unwrap_or(&first);
            (vec![first, last], sc.detection_time)
        }
    };
    let horizon = if horizon > 0.0 { horizon } else { sc.drive.period() };
    let mut dt = f64::INFINITY;
    for off in offsets {
        dt = dt.min(choose_step_over(&sc.drive.with_offset(off), g_max, sc.accuracy, horizon, min_dt)?);
    }
    Ok(dt)
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn project(p_e: f64, p_plus: f64, atoms: u64, seed: u64, shot_index: u64) -> Result<(f64, f64)> {
    let mut rng = keyed_rng(seed, PROJECTION_DOMAIN, shot_index);
    let mut draw = |p: f64| -> Result<f64> {
        let dist = Binomial::new(atoms, p.clamp(0.0, 1.0)).map_err(|e| Error::invalid("atoms_per_shot", e.to_string()))?;
        Ok(dist.sample(&mut rng) as f64 / atoms as f64)
    };
    let e = draw(p_e)?;
    let plus = draw(p_plus)?;
    Ok((e, plus))
}

/// Runs the scan. Shot `s` of point `i` has index `i·shots + s` and starts at
/// wall-clock time `index · cycle_s`; all randomness is keyed on
/// `(seed, index)`, so results do not depend on thread count.
pub fn run_scenario(scenario: &Scenario) -> Result<ScanResult> {
    scenario.validate()?;
    let sc = scenario;
    let bins = sc.coupling_bins()?;
    let dt = scenario_step(sc, &bins)?;
    let drift = DriftModel { seed: sc.seed, ..sc.drift };
    let shots = sc.shots_per_point;
    let n_points = sc.scan_points.len();

    // (p_e, p_plus) per (point, shot), row-major
    let shot_values: Vec<(f64, f64)> = if sc.noise {
        (0..n_points * shots)
            .into_par_iter()
            .map(|index| {
                let point = sc.scan_points[index / shots];
                let t_wall = index as f64 * sc.cycle_s;
                let offset = sample_shot_offset(index as u64, t_wall, &drift);
                let (drive, time) = match sc.scan_axis {
                    ScanAxis::DetectionTime => (sc.drive, point),
                    ScanAxis::Detuning => (sc.drive.with_offset(point), sc.detection_time),
                };
                Ok(ensemble_populations(&drive, &bins, offset, &[time], dt)?[0])
            })
            .collect::<Result<_>>()?
    } else {
        let means: Vec<(f64, f64)> = match sc.scan_axis {
            ScanAxis::DetectionTime => ensemble_populations(&sc.drive, &bins, 0.0, &sc.scan_points, dt)?,
            ScanAxis::Detuning => sc
                .scan_points
                .par_iter()
                .map(|&det| Ok(ensemble_populations(&sc.drive.with_offset(det), &bins, 0.0, &[sc.detection_time], dt)?[0]))
                .collect::<Result<_>>()?,
        };
        means.iter().flat_map(|&m| std::iter::repeat_n(m, shots)).collect()
    };

    let shot_values: Vec<(f64, f64)> = match sc.atoms_per_shot {
        Some(atoms) => shot_values
            .into_par_iter()
            .enumerate()
            .map(|(index, (p_e, p_plus))| project(p_e, p_plus, atoms, sc.seed, index as u64))
            .collect::<Result<_>>()?,
        None => shot_values,
    };

    let points = sc
        .scan_points
        .iter()
        .zip(shot_values.chunks(shots))
        .map(|(&x, values)| {
            let e: Vec<f64> = values.iter().map(|v| v.0).collect();
            let p: Vec<f64> = values.iter().map(|v| v.1).collect();
            let (p_e_mean, p_e_stderr) = mean_and_stderr(&e);
            let (p_plus_mean, p_plus_stderr) = mean_and_stderr(&p);
            ScanPoint {
                x,
                p_e_mean: p_e_mean.clamp(0.0, 1.0),
                p_plus_mean: p_plus_mean.clamp(0.0, 1.0),
                p_e_stderr,
                p_plus_stderr,
                shots,
            }
        })
        .collect();

    Ok(ScanResult {
        points,
        scenario: sc.clone(),
        seed: sc.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

/// Adiabatic populations `(p_minus, p_plus)` of a diabatic state at time `t`.
pub fn to_adiabatic(state: &QubitState, drive: &DriveParams, coupling: f64, t: f64) -> Result<(f64, f64)> {
    let norm = state.norm_sqr();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("state", format!("must be normalized, |ψ|² = {norm}")));
    }
    let frame = eigen_frame(t, drive, coupling)?;
    let (minus, plus) = frame.to_adiabatic(state);
    Ok((minus.norm_sqr(), plus.norm_sqr()))
}

pub const PRESET_NAMES: [&str; 6] =
    ["fast-constructive", "fast-destructive", "slow-constructive", "slow-destructive", "rabi-320", "rabi-400"];

const SAMPLES_PER_PERIOD: usize = 40;

fn periodic_grid(period: f64, n_periods: usize) -> Vec<f64> {
    let n = n_periods * SAMPLES_PER_PERIOD;
    (0..=n).map(|k| period * k as f64 / SAMPLES_PER_PERIOD as f64).collect()
}

/// Compiled-in reference parameter sets.
pub fn preset(name: &str) -> Result<Scenario> {
    let lz = |g: f64, a: f64, fs: f64, periods: usize, basis: Basis| -> Result<Scenario> {
        let drive = DriveParams::new(g, a, fs, 0.0)?;
        let mut sc = Scenario::time_scan(name, drive, periodic_grid(drive.period(), periods));
        sc.basis_out = basis;
        Ok(sc)
    };
    let rabi = |g: f64| -> Result<Scenario> {
        let drive = DriveParams::new(g, 0.0, 62.5, 0.0)?;
        let times = (0..=512).map(|k| k as f64 * 0.125e-3).collect();
        let mut sc = Scenario::time_scan(name, drive, times);
        sc.motion = Motion::Thermal;
        sc.noise = true;
        Ok(sc)
    };
    match name {
        "fast-constructive" => lz(120.0, 13.3, 200.0, 6, Basis::Diabatic),
        "fast-destructive" => lz(120.0, 11.55, 200.0, 6, Basis::Diabatic),
        "slow-constructive" => lz(320.0, 22.2, 62.5, 4, Basis::Adiabatic),
        "slow-destructive" => lz(320.0, 20.6, 62.5, 4, Basis::Diabatic),
        "rabi-320" => rabi(320.0),
        "rabi-400" => rabi(400.0),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn uncoupled_scan_stays_in_ground() {
        let drive = DriveParams::new(0.0, 13.3, 200.0, 0.0).unwrap();
        let sc = Scenario::time_scan("zero", drive, vec![0.0, 1e-3, 2.5e-3, 5e-3]);
        let res = run_scenario(&sc).unwrap();
        for p in &res.points {
            assert_eq!(p.p_e_mean, 0.0);
            assert_eq!(p.p_e_stderr, 0.0);
        }
    }

    #[test]
    fn presets_carry_reference_parameters() {
        let fc = preset("fast-constructive").unwrap();
        assert_eq!((fc.drive.g_bare, fc.drive.amplitude, fc.drive.static_detuning), (120.0, 13.3, 0.0));
        assert!((fc.drive.mod_freq_hz() - 200.0).abs() < 1e-12);
        assert_eq!(fc.scan_points.len(), 6 * 40 + 1);
        assert!((fc.scan_points.last().unwrap() - 0.03).abs() < 1e-15);
        let sd = preset("slow-destructive").unwrap();
        assert_eq!((sd.drive.g_bare, sd.drive.amplitude), (320.0, 20.6));
        assert!((sd.drive.mod_freq_hz() - 62.5).abs() < 1e-12);
        let r = preset("rabi-400").unwrap();
        assert_eq!((r.drive.g_bare, r.drive.amplitude), (400.0, 0.0));
        assert!(matches!(preset("fig-9"), Err(Error::UnknownPreset(_))));
        for name in PRESET_NAMES {
            preset(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn adiabatic_populations() {
        let drive = DriveParams::new(120.0, 13.3, 200.0, 0.0).unwrap();
        // t = 0: detuning is at its positive maximum, far from the crossing
        let (m, p) = to_adiabatic(&QubitState::excited(), &drive, 120.0, 0.0).unwrap();
        assert!(p > 0.999 && (m + p - 1.0).abs() < 1e-12);
        let tc = crate::model::crossing_times(&drive, 0.0, drive.period()).unwrap()[0];
        let (m, p) = to_adiabatic(&QubitState::ground(), &drive, 120.0, tc).unwrap();
        assert!((p - 0.5).abs() < 1e-6 && (m + p - 1.0).abs() < 1e-12);
        let bad = QubitState { amp_g: Complex64::new(1.0, 0.0), amp_e: Complex64::new(1.0, 0.0) };
        assert!(to_adiabatic(&bad, &drive, 120.0, 0.0).is_err());
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        let base = preset("fast-constructive").unwrap();
        let mut sc = base.clone();
        sc.scan_points.clear();
        assert!(run_scenario(&sc).is_err());
        let mut sc = base.clone();
        sc.scan_points = vec![2e-3, 1e-3];
        assert!(run_scenario(&sc).is_err());
        let mut sc = base;
        sc.shots_per_point = 0;
        assert!(run_scenario(&sc).is_err());
    }

    #[test]
    fn projection_noise_is_seeded() {
        let drive = DriveParams::new(120.0, 0.0, 200.0, 0.0).unwrap();
        let mut sc = Scenario::time_scan("proj", drive, vec![1e-3, 2e-3]);
        sc.shots_per_point = 8;
        sc.atoms_per_shot = Some(100);
        sc.seed = 4;
        let a = run_scenario(&sc).unwrap();
        let b = run_scenario(&sc).unwrap();
        assert_eq!(a, b);
        assert!(a.points.iter().all(|p| p.p_e_stderr > 0.0 && p.shots == 8));
    }
}

//! Flat run configuration and its resolution into a [`Scenario`].

use std::path::{Path, PathBuf};

use lzro_core::experiment::{preset, Basis, Motion, ScanAxis, Scenario};
use lzro_core::model::DriveParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Every key is optional; unset keys fall back to the preset, if any.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_bare_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mod_freq_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub static_detuning_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_phase_rad: Option<f64>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub motion: Option<Motion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble_bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temp_z_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temp_x_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trap_freq_z_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trap_freq_x_hz: Option<f64>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift_linear_hz_per_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift_compensation_hz_per_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift_step_period_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift_quadratic_hz_per_s2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shot_jitter_hz: Option<f64>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan_axis: Option<ScanAxis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan_values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan_start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan_stop: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detection_time_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots_per_point: Option<usize>,
    /// 0 means unlimited (noise-free mean).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atoms_per_shot: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis: Option<Basis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,

    // output controls, never echoed
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contrast_out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contrast_window_s: Option<f64>,
}

/// Sidecar layout; `scenario` reproduces the run bit for bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub config: RunConfig,
    pub scenario: Scenario,
    pub seed: u64,
    pub version: String,
    pub columns: Vec<String>,
    pub contrast_definition: String,
}

/// A parsed config file: either flat keys or a sidecar from an earlier run.
pub enum Loaded {
    Flat(Box<RunConfig>),
    Sidecar(Box<Scenario>),
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let side: Sidecar = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        return Ok(Loaded::Sidecar(Box::new(side.scenario)));
    }
    let cfg: RunConfig =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(Loaded::Flat(Box::new(cfg)))
}

macro_rules! merge {
    ($dst:ident, $src:ident, $($field:ident),* $(,)?) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field.clone(); } )*
    };
}

impl RunConfig {
    /// Fields set in `over` replace those in `self`.
    pub fn overlay(&mut self, over: &RunConfig) {
        merge!(
            self, over, preset, name, g_bare_hz, amplitude, mod_freq_hz, static_detuning_hz, initial_phase_rad,
            motion, ensemble_bins, eta_z, eta_x, temp_z_k, temp_x_k, trap_freq_z_hz, trap_freq_x_hz, noise,
            drift_linear_hz_per_s, drift_compensation_hz_per_s, drift_step_period_s, drift_quadratic_hz_per_s2,
            shot_jitter_hz, scan_axis, scan_values, scan_start, scan_stop, scan_count, detection_time_s,
            shots_per_point, atoms_per_shot, cycle_s, basis, seed, accuracy, jobs, out, format, contrast_out,
            contrast_window_s,
        );
    }

    /// Applies every simulation key to `base`.
    pub fn apply(&self, mut sc: Scenario) -> Result<Scenario, CliError> {
        if let Some(v) = &self.name {
            sc.name = v.clone();
        }
        let d = &mut sc.drive;
        let mod_hz = self.mod_freq_hz.unwrap_or(d.mod_freq_hz());
        let mut drive = if self.mod_freq_hz.is_some() {
            DriveParams::new(d.g_bare, d.amplitude, mod_hz, d.static_detuning).map_err(config_err)?
        } else {
            *d
        };
        drive.initial_phase = d.initial_phase;
        set(&mut drive.g_bare, self.g_bare_hz);
        set(&mut drive.amplitude, self.amplitude);
        set(&mut drive.static_detuning, self.static_detuning_hz);
        set(&mut drive.initial_phase, self.initial_phase_rad);
        sc.drive = drive;

        set(&mut sc.motion, self.motion);
        set(&mut sc.ensemble_bins, self.ensemble_bins);
        let l = &mut sc.lattice;
        set(&mut l.eta_z, self.eta_z);
        set(&mut l.eta_x, self.eta_x);
        set(&mut l.temp_z, self.temp_z_k);
        set(&mut l.temp_x, self.temp_x_k);
        set(&mut l.trap_freq_z, self.trap_freq_z_hz);
        set(&mut l.trap_freq_x, self.trap_freq_x_hz);

        set(&mut sc.noise, self.noise);
        let m = &mut sc.drift;
        set(&mut m.linear_rate, self.drift_linear_hz_per_s);
        set(&mut m.compensation_rate, self.drift_compensation_hz_per_s);
        set(&mut m.compensation_step_period, self.drift_step_period_s);
        set(&mut m.quadratic_residual, self.drift_quadratic_hz_per_s2);
        set(&mut m.shot_jitter_sigma, self.shot_jitter_hz);

        set(&mut sc.scan_axis, self.scan_axis);
        if let Some(values) = &self.scan_values {
            sc.scan_points = values.clone();
        } else if self.scan_start.is_some() || self.scan_stop.is_some() || self.scan_count.is_some() {
            let (Some(a), Some(b), Some(n)) = (self.scan_start, self.scan_stop, self.scan_count) else {
                return Err(CliError::Config(
                    "scan_start, scan_stop and scan_count must be given together".into(),
                ));
            };
            sc.scan_points = linspace(a, b, n);
        }
        set(&mut sc.detection_time, self.detection_time_s);
        set(&mut sc.shots_per_point, self.shots_per_point);
        if let Some(n) = self.atoms_per_shot {
            sc.atoms_per_shot = (n > 0).then_some(n);
        }
        set(&mut sc.cycle_s, self.cycle_s);
        set(&mut sc.basis_out, self.basis);
        set(&mut sc.seed, self.seed);
        set(&mut sc.accuracy, self.accuracy);
        sc.validate().map_err(config_err)?;
        Ok(sc)
    }

    /// Builds the scenario: preset (if named) overlaid with every set key.
    pub fn resolve(&self) -> Result<Scenario, CliError> {
        let base = match &self.preset {
            Some(name) => preset(name).map_err(config_err)?,
            None => {
                let need = |v: Option<f64>, key: &str| {
                    v.ok_or_else(|| CliError::Config(format!("missing key `{key}` (or give a preset)")))
                };
                let drive = DriveParams::new(
                    need(self.g_bare_hz, "g_bare_hz")?,
                    need(self.amplitude, "amplitude")?,
                    need(self.mod_freq_hz, "mod_freq_hz")?,
                    self.static_detuning_hz.unwrap_or(0.0),
                )
                .map_err(config_err)?;
                Scenario::time_scan("custom", drive, Vec::new())
            }
        };
        self.apply(base)
    }

    /// Flat echo of every simulation parameter of `sc`.
    pub fn echo(sc: &Scenario) -> RunConfig {
        RunConfig {
            name: Some(sc.name.clone()),
            g_bare_hz: Some(sc.drive.g_bare),
            amplitude: Some(sc.drive.amplitude),
            mod_freq_hz: Some(sc.drive.mod_freq_hz()),
            static_detuning_hz: Some(sc.drive.static_detuning),
            initial_phase_rad: Some(sc.drive.initial_phase),
            motion: Some(sc.motion),
            ensemble_bins: Some(sc.ensemble_bins),
            eta_z: Some(sc.lattice.eta_z),
            eta_x: Some(sc.lattice.eta_x),
            temp_z_k: Some(sc.lattice.temp_z),
            temp_x_k: Some(sc.lattice.temp_x),
            trap_freq_z_hz: Some(sc.lattice.trap_freq_z),
            trap_freq_x_hz: Some(sc.lattice.trap_freq_x),
            noise: Some(sc.noise),
            drift_linear_hz_per_s: Some(sc.drift.linear_rate),
            drift_compensation_hz_per_s: Some(sc.drift.compensation_rate),
            drift_step_period_s: Some(sc.drift.compensation_step_period),
            drift_quadratic_hz_per_s2: Some(sc.drift.quadratic_residual),
            shot_jitter_hz: Some(sc.drift.shot_jitter_sigma),
            scan_axis: Some(sc.scan_axis),
            scan_values: Some(sc.scan_points.clone()),
            detection_time_s: Some(sc.detection_time),
            shots_per_point: Some(sc.shots_per_point),
            atoms_per_shot: Some(sc.atoms_per_shot.unwrap_or(0)),
            cycle_s: Some(sc.cycle_s),
            basis: Some(sc.basis_out),
            seed: Some(sc.seed),
            accuracy: Some(sc.accuracy),
            ..RunConfig::default()
        }
    }
}

fn set<T: Copy>(dst: &mut T, src: Option<T>) {
    if let Some(v) = src {
        *dst = v;
    }
}

fn config_err(e: lzro_core::Error) -> CliError {
    match e {
        lzro_core::Error::UnknownPreset(name) => CliError::Config(format!(
            "unknown preset `{name}`; choose one of {}",
            lzro_core::experiment::PRESET_NAMES.join(", ")
        )),
        other => CliError::Config(other.to_string()),
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

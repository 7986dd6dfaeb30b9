//! `lzro`: run scenarios, sweep drive parameters and fit contrast data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lzro_core::analysis::{fit_exponential, fit_linear, fringe_contrast, ContrastSeries};
use lzro_core::experiment::{preset, run_scenario, Basis, Motion, ScanAxis, Scenario, PRESET_NAMES};
use lzro_core::lzsm::{interference_extrema, EXTREMA_THRESHOLD, per_period_transfer, InterferenceExtremum, InterferenceKind};
use serde::Serialize;

use config::{linspace, load, Format, Loaded, RunConfig, Sidecar};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("simulation error: {0}")]
    Runtime(#[from] lzro_core::Error),
    #[error("fit diverged: {0}")]
    Fit(lzro_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Runtime(_) | CliError::Io(_) => 3,
            CliError::Fit(_) => 4,
        }
    }
}

#[derive(Parser)]
#[command(name = "lzro", version, about = "Landau-Zener Rabi oscillation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its scan.
    Run(RunArgs),
    /// Sweep the drive amplitude or the laser detuning.
    Sweep(SweepArgs),
    /// Fit a two-column contrast file.
    Fit(FitArgs),
    /// List the compiled-in presets.
    Presets,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Preset to start from.
    #[arg(long)]
    preset: Option<String>,
    /// TOML config, or a `.meta.json` sidecar from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "LZRO_SEED")]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "LZRO_JOBS")]
    jobs: Option<usize>,
    #[arg(long, value_enum)]
    basis: Option<BasisArg>,
    #[arg(long, value_enum)]
    motion: Option<MotionArg>,
    #[arg(long)]
    noise: Option<bool>,
    #[arg(long)]
    shots: Option<usize>,
    /// Atoms per shot for projection noise; 0 disables it.
    #[arg(long)]
    atoms: Option<u64>,
    #[arg(long)]
    g_bare_hz: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    mod_freq_hz: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    static_detuning_hz: Option<f64>,
    /// Any config key, as `key=value` in TOML syntax. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Data file; CSV goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Also write windowed fringe contrast here.
    #[arg(long)]
    contrast_out: Option<PathBuf>,
    /// Contrast window, s. Defaults to the drive period, or 1/g without drive.
    #[arg(long)]
    contrast_window_s: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepAxis {
    Amplitude,
    Detuning,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_enum)]
    axis: SweepAxis,
    #[arg(long, allow_negative_numbers = true)]
    from: f64,
    #[arg(long, allow_negative_numbers = true)]
    to: f64,
    #[arg(long, default_value_t = 61)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitModel {
    Exponential,
    Linear,
}

#[derive(Args)]
struct FitArgs {
    /// Two columns: time and contrast. `#` lines and a header row are skipped.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    model: FitModel,
    /// Write the fit report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Diabatic,
    Adiabatic,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum MotionArg {
    None,
    Ground,
    Thermal,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Presets => cmd_presets(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lzro: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

impl ScenarioArgs {
    fn overrides(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        for kv in &self.set {
            if !kv.contains('=') {
                return Err(CliError::Config(format!("--set expects key=value, got `{kv}`")));
            }
            let one: RunConfig =
                toml::from_str(kv).map_err(|e| CliError::Config(format!("--set {kv}: {e}")))?;
            cfg.overlay(&one);
        }
        let flags = RunConfig {
            preset: self.preset.clone(),
            seed: self.seed,
            jobs: self.jobs,
            basis: self.basis.map(|b| match b {
                BasisArg::Diabatic => Basis::Diabatic,
                BasisArg::Adiabatic => Basis::Adiabatic,
                BasisArg::Both => Basis::Both,
            }),
            motion: self.motion.map(|m| match m {
                MotionArg::None => Motion::None,
                MotionArg::Ground => Motion::Ground,
                MotionArg::Thermal => Motion::Thermal,
            }),
            noise: self.noise,
            shots_per_point: self.shots,
            atoms_per_shot: self.atoms,
            g_bare_hz: self.g_bare_hz,
            amplitude: self.amplitude,
            mod_freq_hz: self.mod_freq_hz,
            static_detuning_hz: self.static_detuning_hz,
            ..RunConfig::default()
        };
        cfg.overlay(&flags);
        Ok(cfg)
    }

    /// Resolved scenario plus the merged flat config (for output controls).
    fn resolve(&self) -> Result<(Scenario, RunConfig), CliError> {
        let overrides = self.overrides()?;
        let (scenario, merged) = match &self.config {
            Some(path) => match load(path)? {
                Loaded::Flat(mut cfg) => {
                    cfg.overlay(&overrides);
                    (cfg.resolve()?, *cfg)
                }
                Loaded::Sidecar(sc) => {
                    if overrides.preset.is_some() {
                        return Err(CliError::Config("--preset cannot be combined with a sidecar config".into()));
                    }
                    (overrides.apply(*sc)?, overrides)
                }
            },
            None => {
                if overrides.preset.is_none() && overrides.g_bare_hz.is_none() {
                    return Err(CliError::Config("give --preset, --config, or the drive keys".into()));
                }
                (overrides.resolve()?, overrides)
            }
        };
        if let Some(jobs) = merged.jobs {
            // the global pool can only be set once; later calls are harmless
            let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
        }
        Ok((scenario, merged))
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let (scenario, mut merged) = args.scenario.resolve()?;
    let flags = RunConfig {
        out: args.out.clone(),
        format: args.format,
        contrast_out: args.contrast_out.clone(),
        contrast_window_s: args.contrast_window_s,
        ..RunConfig::default()
    };
    merged.overlay(&flags);
    let format = merged.format.unwrap_or(Format::Csv);

    let window = match merged.contrast_window_s {
        Some(w) => Some(w),
        None if merged.contrast_out.is_some() => Some(if scenario.drive.amplitude != 0.0 {
            scenario.drive.period()
        } else {
            1.0 / scenario.drive.g_bare
        }),
        None => None,
    };
    if merged.contrast_out.is_some() && scenario.scan_axis != ScanAxis::DetectionTime {
        return Err(CliError::Config("contrast output needs a detection-time scan".into()));
    }

    let result = run_scenario(&scenario)?;
    let columns = output::columns(&scenario);
    let body = match format {
        Format::Csv => output::scan_csv(&result)?,
        Format::Json => output::json(&result)?,
    };
    match &merged.out {
        Some(path) => {
            std::fs::write(path, &body)?;
            let side = Sidecar {
                config: RunConfig::echo(&scenario),
                scenario: scenario.clone(),
                seed: scenario.seed,
                version: result.version.clone(),
                columns,
                contrast_definition: "peak-to-peak p_e per window (max - min)".into(),
            };
            std::fs::write(sidecar_path(path), output::json(&side)?)?;
            eprintln!("wrote {} ({} points)", path.display(), result.points.len());
        }
        None => emit(&body)?,
    }

    if let (Some(path), Some(window)) = (&merged.contrast_out, window) {
        let series = fringe_contrast(&result.trace(), window)?;
        std::fs::write(path, output::contrast_csv(&series)?)?;
        eprintln!("wrote {} ({} windows of {window:e} s)", path.display(), series.len());
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepReport {
    axis: String,
    values: Vec<f64>,
    /// Extrema refined on the impulse model.
    analytic_extrema: Vec<InterferenceExtremum>,
    /// Interior local extrema of the sampled transfer column.
    grid_extrema: Vec<InterferenceExtremum>,
    scenario: Scenario,
    version: String,
}

fn grid_extrema(values: &[f64], transfer: &[f64]) -> Vec<InterferenceExtremum> {
    let mut out = Vec::new();
    let lo = transfer.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = transfer.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo >= EXTREMA_THRESHOLD) {
        return out;
    }
    for i in 1..transfer.len().saturating_sub(1) {
        let (l, c, r) = (transfer[i - 1], transfer[i], transfer[i + 1]);
        let kind = if c > l && c >= r {
            InterferenceKind::Constructive
        } else if c < l && c <= r {
            InterferenceKind::Destructive
        } else {
            continue;
        };
        out.push(InterferenceExtremum { amplitude: values[i], kind, transfer: c });
    }
    out
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    if args.points < 2 || !(args.to > args.from) {
        return Err(CliError::Config("sweep needs --to > --from and --points ≥ 2".into()));
    }
    let (base, merged) = args.scenario.resolve()?;
    let values = linspace(args.from, args.to, args.points);
    // a time-scan base is read out at its last time unless detection_time_s is given
    let detection = match (merged.detection_time_s, base.scan_axis) {
        (Some(t), _) => t,
        (None, ScanAxis::DetectionTime) => *base.scan_points.last().unwrap_or(&base.detection_time),
        (None, ScanAxis::Detuning) => base.detection_time,
    };
    let g = base.drive.g_bare;

    let (header, rows, report) = match args.axis {
        SweepAxis::Amplitude => {
            if !(args.from > 0.0) {
                return Err(CliError::Config("amplitude sweep needs --from > 0".into()));
            }
            let mut rows = Vec::with_capacity(values.len());
            let mut transfer = Vec::with_capacity(values.len());
            for &a in &values {
                let mut sc = base.clone();
                sc.drive.amplitude = a;
                sc.scan_axis = ScanAxis::DetectionTime;
                sc.scan_points = vec![detection];
                let p = run_scenario(&sc)?.points[0];
                let tr = per_period_transfer(&sc.drive, g)?;
                transfer.push(tr);
                rows.push(vec![a, tr, p.p_e_mean, p.p_e_stderr]);
            }
            let analytic =
                interference_extrema(g, base.drive.mod_freq, base.drive.static_detuning, (args.from, args.to))?;
            let grid = grid_extrema(&values, &transfer);
            let mut notes = String::new();
            for e in &analytic {
                notes += &format!("impulse model: {:?} at A = {:.4} (transfer {:.5})\n", e.kind, e.amplitude, e.transfer);
            }
            for e in &grid {
                notes += &format!("sweep grid:    {:?} at A = {:.4} (transfer {:.5})\n", e.kind, e.amplitude, e.transfer);
            }
            // stdout carries the table when there is no --out
            if args.out.is_some() {
                emit(&notes)?;
            } else {
                eprint!("{notes}");
            }
            let report = SweepReport {
                axis: "amplitude".into(),
                values: values.clone(),
                analytic_extrema: analytic,
                grid_extrema: grid,
                scenario: base.clone(),
                version: env!("CARGO_PKG_VERSION").into(),
            };
            (vec!["amplitude", "transfer_per_period", "p_e_final", "p_e_stderr"], rows, report)
        }
        SweepAxis::Detuning => {
            let mut sc = base.clone();
            sc.scan_axis = ScanAxis::Detuning;
            sc.scan_points = values.clone();
            sc.detection_time = detection;
            let res = run_scenario(&sc)?;
            let rows = res.points.iter().map(|p| vec![p.x, p.p_e_mean, p.p_plus_mean, p.p_e_stderr]).collect();
            let report = SweepReport {
                axis: "detuning".into(),
                values: values.clone(),
                analytic_extrema: Vec::new(),
                grid_extrema: Vec::new(),
                scenario: sc,
                version: env!("CARGO_PKG_VERSION").into(),
            };
            (vec!["detuning_hz", "p_e_final", "p_plus_final", "p_e_stderr"], rows, report)
        }
    };

    let body = output::table_csv(&header, &rows)?;
    match &args.out {
        Some(path) => {
            std::fs::write(path, &body)?;
            std::fs::write(sidecar_path(path), output::json(&report)?)?;
            eprintln!("wrote {} ({} rows)", path.display(), rows.len());
        }
        None => emit(&body)?,
    }
    Ok(())
}

fn read_series(path: &Path) -> Result<ContrastSeries, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        let parsed = (fields.len() >= 2)
            .then(|| Some((fields[0].parse::<f64>().ok()?, fields[1].parse::<f64>().ok()?)))
            .flatten();
        match parsed {
            Some(pair) => pairs.push(pair),
            // a single leading header row is allowed
            None if pairs.is_empty() && lineno == first_content_line(&text) => continue,
            None => {
                return Err(CliError::Input(format!("{}:{}: expected two numbers, got `{line}`", path.display(), lineno + 1)))
            }
        }
    }
    if pairs.is_empty() {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    }
    Ok(ContrastSeries::from_pairs(&pairs))
}

fn first_content_line(text: &str) -> usize {
    text.lines()
        .position(|l| {
            let l = l.trim();
            !l.is_empty() && !l.starts_with('#')
        })
        .unwrap_or(0)
}

fn cmd_fit(args: FitArgs) -> Result<(), CliError> {
    let series = read_series(&args.input)?;
    let fit = match args.model {
        FitModel::Exponential => fit_exponential(&series),
        FitModel::Linear => fit_linear(&series),
    }
    .map_err(|e| match e {
        lzro_core::Error::FitDiverged { .. } => CliError::Fit(e),
        other => CliError::Input(other.to_string()),
    })?;
    let body = output::json(&fit)?;
    emit(&format!("{body}\n"))?;
    if let Some(path) = &args.out {
        std::fs::write(path, &body)?;
    }
    Ok(())
}

fn short(v: f64) -> String {
    let s = format!("{v:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn cmd_presets() -> Result<(), CliError> {
    let mut text = format!(
        "{:<18} {:>7} {:>7} {:>8} {:>7} {:>8} {:>6} {:>10}\n",
        "name", "g_Hz", "A", "f_s_Hz", "points", "motion", "noise", "basis"
    );
    for name in PRESET_NAMES {
        let sc = preset(name)?;
        text += &format!(
            "{:<18} {:>7} {:>7} {:>8} {:>7} {:>8} {:>6} {:>10}\n",
            name,
            sc.drive.g_bare,
            sc.drive.amplitude,
            short(sc.drive.mod_freq_hz()),
            sc.scan_points.len(),
            format!("{:?}", sc.motion).to_lowercase(),
            sc.noise,
            format!("{:?}", sc.basis_out).to_lowercase(),
        );
    }
    emit(&text)
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) -> Result<(), CliError> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

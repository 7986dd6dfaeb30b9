//! Closed-form Landau-Zener transitions and the adiabatic-impulse model.
//!
//! Between crossings the state follows the instantaneous eigenstates and the
//! adiabatic amplitudes `(a₋, a₊)` pick up phases `e^{±iζ}` with
//! `ζ = ½∫ gap dt`. Each crossing is an instantaneous 2×2 scattering matrix
//! built from the LZ probability `P` and the Stokes phase `φ_S`. In the real
//! gauge of [`EigenFrame`](crate::model::EigenFrame), ordered `(−, +)`:
//!
//! ```text
//! downward sweep (dΔ/dt < 0):  [ √(1−P)·e^{iφ_S}   −√P            ]
//!                              [ √P                 √(1−P)·e^{−iφ_S} ]
//! upward sweep   (dΔ/dt > 0):  same with the off-diagonal signs swapped
//! ```

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{angular, crossing_times, detuning_rate, effective_detuning, DriveParams, EigenFrame, QubitState};
use crate::propagator::{Trace, TraceSample, Unitary2};
use crate::special::{golden_minimize, integrate, ln_gamma};

/// Absolute tolerance of the adiabatic phase quadrature, rad.
pub const PHASE_TOLERANCE: f64 = 1e-8;

/// Amplitude grid spacing used by [`interference_extrema`].
pub const EXTREMA_GRID_STEP: f64 = 0.05;

/// Width to which each extremum is refined.
pub const EXTREMA_REFINE_TOL: f64 = 1e-3;

/// Per-period transfer below which the scan is considered flat.
pub const EXTREMA_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub time: f64,
    /// `|dΔ/dt|` at the crossing, rad/s².
    pub sweep_rate: f64,
    pub p_lz: f64,
    pub stokes_phase: f64,
    /// Adiabatic phase accumulated until the next crossing (or window end).
    pub adiabatic_phase_to_next: f64,
    /// True when the detuning decreases through zero.
    pub downward: bool,
}

/// `|dΔ/dt|` at a crossing, `A·ωs²·|sin(ωs·t + φ₀)|`.
pub fn sweep_rate(drive: &DriveParams, crossing_time: f64) -> Result<f64> {
    let residual = effective_detuning(crossing_time, drive, 0.0);
    let tolerance = 1e-6 * drive.sweep_amplitude().max(f64::MIN_POSITIVE);
    if drive.amplitude == 0.0 || residual.abs() > tolerance {
        return Err(Error::NotACrossing { time: crossing_time, residual });
    }
    Ok(detuning_rate(crossing_time, drive).abs())
}

fn check_rate(sweep_rate: f64) -> Result<()> {
    if !(sweep_rate > 0.0 && sweep_rate.is_finite()) {
        return Err(Error::invalid("sweep_rate", format!("must be finite and > 0, got {sweep_rate}")));
    }
    Ok(())
}

/// Adiabaticity parameter `δ_a = Ω²/(4v)`.
pub fn adiabaticity(coupling: f64, sweep_rate: f64) -> f64 {
    let omega = angular(coupling);
    omega * omega / (4.0 * sweep_rate)
}

/// Probability of staying in the initial diabatic state through one crossing,
/// `exp(−π·Ω²/(2v))`.
pub fn p_lz(coupling: f64, sweep_rate: f64) -> Result<f64> {
    check_rate(sweep_rate)?;
    Ok((-2.0 * PI * adiabaticity(coupling, sweep_rate)).exp())
}

/// Stokes phase `π/4 + δ_a(ln δ_a − 1) + arg Γ(1 − iδ_a)`.
pub fn stokes_phase(coupling: f64, sweep_rate: f64) -> Result<f64> {
    check_rate(sweep_rate)?;
    let da = adiabaticity(coupling, sweep_rate);
    if da == 0.0 {
        return Ok(FRAC_PI_4);
    }
    Ok(FRAC_PI_4 + da * (da.ln() - 1.0) + ln_gamma(Complex64::new(1.0, -da)).im)
}

/// `½∫ gap dt` over `[t1, t2]`.
pub fn adiabatic_phase(t1: f64, t2: f64, drive: &DriveParams, coupling: f64) -> Result<f64> {
    if !(t1 <= t2) {
        return Err(Error::invalid("t1", format!("t1 = {t1} exceeds t2 = {t2}")));
    }
    let omega = angular(coupling);
    Ok(0.5 * integrate(|t| effective_detuning(t, drive, 0.0).hypot(omega), t1, t2, 2.0 * PHASE_TOLERANCE))
}

/// Crossing events in `[start, end]` with phases to the following crossing.
pub fn crossing_events(drive: &DriveParams, coupling: f64, start: f64, end: f64) -> Result<Vec<CrossingEvent>> {
    let times = crossing_times(drive, start, end)?;
    let mut events = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        let v = sweep_rate(drive, t)?;
        let next = times.get(i + 1).copied().unwrap_or(end);
        events.push(CrossingEvent {
            time: t,
            sweep_rate: v,
            p_lz: p_lz(coupling, v)?,
            stokes_phase: stokes_phase(coupling, v)?,
            adiabatic_phase_to_next: adiabatic_phase(t, next, drive, coupling)?,
            downward: detuning_rate(t, drive) < 0.0,
        });
    }
    Ok(events)
}

/// Scattering matrix of one crossing in the `(−, +)` basis.
pub fn crossing_matrix(event: &CrossingEvent) -> Unitary2 {
    let s = event.p_lz.sqrt();
    let c = (1.0 - event.p_lz).max(0.0).sqrt();
    let phase = Complex64::from_polar(1.0, event.stokes_phase);
    let off = if event.downward { s } else { -s };
    Unitary2 { a: phase * c, b: Complex64::new(-off, 0.0), c: Complex64::new(off, 0.0), d: phase.conj() * c }
}

/// Adiabatic evolution by phase `ζ` in the `(−, +)` basis.
pub fn adiabatic_matrix(zeta: f64) -> Unitary2 {
    Unitary2 {
        a: Complex64::from_polar(1.0, zeta),
        b: Complex64::new(0.0, 0.0),
        c: Complex64::new(0.0, 0.0),
        d: Complex64::from_polar(1.0, -zeta),
    }
}

/// Adiabatic-impulse propagator for one drive and coupling, starting from
/// `|g⟩` at `t = 0`.
struct ImpulseModel {
    drive: DriveParams,
    coupling: f64,
    events: Vec<CrossingEvent>,
}

impl ImpulseModel {
    fn new(drive: &DriveParams, coupling: f64, end: f64) -> Result<Self> {
        let coupling = coupling.abs();
        let events = crossing_events(drive, coupling, 0.0, end)?;
        Ok(ImpulseModel { drive: *drive, coupling, events })
    }

    fn frame(&self, t: f64) -> Result<EigenFrame> {
        let detuning = effective_detuning(t, &self.drive, 0.0);
        let omega = angular(self.coupling);
        if detuning == 0.0 && omega == 0.0 {
            return Err(Error::DegenerateFrame { time: t });
        }
        Ok(EigenFrame::from_angular(detuning, omega))
    }

    /// Diabatic state at each of `times` (sorted, none on a crossing).
    fn states_at(&self, times: &[f64]) -> Result<Vec<QubitState>> {
        let (mut minus, mut plus) = self.frame(0.0)?.to_adiabatic(&QubitState::ground());
        let mut t = 0.0;
        let mut next_event = 0;
        let mut out = Vec::with_capacity(times.len());
        for &target in times {
            while next_event < self.events.len() && self.events[next_event].time <= target {
                let ev = &self.events[next_event];
                let zeta = adiabatic_phase(t, ev.time, &self.drive, self.coupling)?;
                let u = crossing_matrix(ev).mul(&adiabatic_matrix(zeta));
                (minus, plus) = (u.a * minus + u.b * plus, u.c * minus + u.d * plus);
                t = ev.time;
                next_event += 1;
            }
            let zeta = adiabatic_phase(t, target, &self.drive, self.coupling)?;
            let (m, p) = (minus * Complex64::from_polar(1.0, zeta), plus * Complex64::from_polar(1.0, -zeta));
            (minus, plus, t) = (m, p, target);
            out.push(self.frame(target)?.to_diabatic(minus, plus));
        }
        Ok(out)
    }
}

/// Adiabatic-impulse trace over `n_periods`, sampled midway between
/// consecutive crossings.
pub fn transfer_matrix_trace(drive: &DriveParams, coupling: f64, n_periods: usize) -> Result<Trace> {
    if n_periods == 0 {
        return Err(Error::invalid("n_periods", "must be ≥ 1"));
    }
    let end = n_periods as f64 * drive.period();
    let model = ImpulseModel::new(drive, coupling, end)?;
    let times: Vec<f64> = model.events.windows(2).map(|w| 0.5 * (w[0].time + w[1].time)).collect();
    let states = model.states_at(&times)?;
    let omega = angular(model.coupling);
    let samples = times
        .iter()
        .zip(&states)
        .map(|(&t, psi)| {
            let frame = EigenFrame::from_angular(effective_detuning(t, drive, 0.0), omega);
            TraceSample { t, p_e: psi.p_e(), p_plus: frame.p_plus(psi) }
        })
        .collect();
    Ok(Trace { samples })
}

/// One-period map in the `(−, +)` basis, from `t = 0` to `t = T`.
pub fn period_matrix(drive: &DriveParams, coupling: f64) -> Result<Unitary2> {
    let period = drive.period();
    let events = crossing_events(drive, coupling.abs(), 0.0, period)?;
    let mut u = Unitary2::identity();
    let mut t = 0.0;
    for ev in &events {
        let zeta = adiabatic_phase(t, ev.time, drive, coupling.abs())?;
        u = crossing_matrix(ev).mul(&adiabatic_matrix(zeta)).mul(&u);
        t = ev.time;
    }
    let zeta = adiabatic_phase(t, period, drive, coupling.abs())?;
    Ok(adiabatic_matrix(zeta).mul(&u))
}

/// Upper-branch population after one drive period starting from `|g⟩`.
pub fn per_period_transfer(drive: &DriveParams, coupling: f64) -> Result<f64> {
    let model = ImpulseModel::new(drive, coupling, drive.period())?;
    let psi = model.states_at(&[drive.period()])?[0];
    Ok(model.frame(drive.period())?.p_plus(&psi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterferenceKind {
    Constructive,
    Destructive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceExtremum {
    pub amplitude: f64,
    pub kind: InterferenceKind,
    /// Per-period transfer at `amplitude`.
    pub transfer: f64,
}

/// Locates maxima (constructive) and minima (destructive) of the per-period
/// transfer over drive amplitudes in `[lo, hi]`.
///
/// `mod_freq` is angular (rad/s); `coupling` and `static_detuning` in Hz.
pub fn interference_extrema(
    coupling: f64,
    mod_freq: f64,
    static_detuning: f64,
    amplitude_range: (f64, f64),
) -> Result<Vec<InterferenceExtremum>> {
    let (lo, hi) = amplitude_range;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::invalid("amplitude_range", format!("need 0 < lo < hi < ∞, got [{lo}, {hi}]")));
    }
    let base = DriveParams {
        g_bare: coupling.abs(),
        amplitude: lo,
        mod_freq,
        static_detuning,
        initial_phase: 0.0,
    };
    base.validate()?;
    let transfer_at = |amplitude: f64| -> f64 {
        let drive = DriveParams { amplitude, ..base };
        per_period_transfer(&drive, coupling).unwrap_or(f64::NAN)
    };

    let n = ((hi - lo) / EXTREMA_GRID_STEP).ceil() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let values: Vec<f64> = grid.par_iter().map(|&a| transfer_at(a)).collect();

    let finite = values.iter().copied().filter(|v| v.is_finite());
    let (vmin, vmax) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(vmax - vmin >= EXTREMA_THRESHOLD) {
        return Ok(Vec::new());
    }

    let mut out = Vec::new();
    for i in 1..n {
        let (l, c, r) = (values[i - 1], values[i], values[i + 1]);
        if !(l.is_finite() && c.is_finite() && r.is_finite()) {
            continue;
        }
        let kind = if c > l && c >= r {
            InterferenceKind::Constructive
        } else if c < l && c <= r {
            InterferenceKind::Destructive
        } else {
            continue;
        };
        let (a, b) = (grid[i - 1], grid[i + 1]);
        let amplitude = match kind {
            InterferenceKind::Constructive => golden_minimize(|x| -transfer_at(x), a, b, EXTREMA_REFINE_TOL),
            InterferenceKind::Destructive => golden_minimize(transfer_at, a, b, EXTREMA_REFINE_TOL),
        };
        let transfer = transfer_at(amplitude);
        if kind == InterferenceKind::Constructive && transfer < EXTREMA_THRESHOLD {
            continue;
        }
        out.push(InterferenceExtremum { amplitude, kind, transfer });
    }
    Ok(out)
}

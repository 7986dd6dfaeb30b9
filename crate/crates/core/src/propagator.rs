//! Unitary time evolution under the driven two-level Hamiltonian.
//!
//! Each step applies the exact 2×2 exponential of the Hamiltonian frozen at
//! the step midpoint. The exponential comes from the Pauli decomposition,
//! `exp(−i·θ·n̂·σ) = cos θ − i sin θ (n̂·σ)`, so every step is unitary to
//! round-off and the scheme is second order in `dt`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{angular, effective_detuning, DriveParams, EigenFrame, QubitState};

/// Default per-sample accuracy target for [`choose_step`].
pub const DEFAULT_ACCURACY: f64 = 1e-6;

/// Steps per shortest dynamical timescale in the step-size bound.
const STEPS_PER_SCALE: f64 = 50.0;

/// A 2×2 matrix `[[a, b], [c, d]]` acting on `(amp_g, amp_e)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary2 {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Unitary2 {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Unitary2 { a: one, b: zero, c: zero, d: one }
    }

    /// `exp(−i·H·dt)` for `H = ½(−Δ σz + Ω σx)` in angular units.
    #[inline]
    pub fn evolution(detuning: f64, coupling: f64, dt: f64) -> Self {
        let gap = (detuning * detuning + coupling * coupling).sqrt();
        if gap == 0.0 {
            return Self::identity();
        }
        let (s, c) = (0.5 * gap * dt).sin_cos();
        let nz = s * detuning / gap;
        let nx = s * coupling / gap;
        Unitary2 {
            a: Complex64::new(c, nz),
            b: Complex64::new(0.0, -nx),
            c: Complex64::new(0.0, -nx),
            d: Complex64::new(c, -nz),
        }
    }

    #[inline]
    pub fn apply(&self, psi: &QubitState) -> QubitState {
        QubitState {
            amp_g: self.a * psi.amp_g + self.b * psi.amp_e,
            amp_e: self.c * psi.amp_g + self.d * psi.amp_e,
        }
    }

    pub fn adjoint(&self) -> Self {
        Unitary2 { a: self.a.conj(), b: self.c.conj(), c: self.b.conj(), d: self.d.conj() }
    }

    /// `self · rhs`.
    pub fn mul(&self, rhs: &Unitary2) -> Self {
        Unitary2 {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }

    /// Frobenius norm of `U†U − I`.
    pub fn unitarity_defect(&self) -> f64 {
        let p = self.adjoint().mul(self);
        let one = Complex64::new(1.0, 0.0);
        ((p.a - one).norm_sqr() + p.b.norm_sqr() + p.c.norm_sqr() + (p.d - one).norm_sqr()).sqrt()
    }
}

/// Midpoint propagator for the step `[t, t + dt]`.
#[inline]
pub fn step_unitary(t: f64, dt: f64, drive: &DriveParams, coupling: f64, offset_hz: f64) -> Unitary2 {
    let detuning = effective_detuning(t + 0.5 * dt, drive, offset_hz);
    Unitary2::evolution(detuning, angular(coupling), dt)
}

/// Advances `state` from `t` to `t + dt`; `coupling` in Hz.
pub fn step(state: &QubitState, t: f64, dt: f64, drive: &DriveParams, coupling: f64) -> QubitState {
    step_unitary(t, dt, drive, coupling, 0.0).apply(state)
}

/// One recorded point of a population trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    /// Diabatic excited population.
    pub p_e: f64,
    /// Upper adiabatic branch population.
    pub p_plus: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trace {
    pub samples: Vec<TraceSample>,
}

impl Trace {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn p_e(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.p_e).collect()
    }

    pub fn p_plus(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.p_plus).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Step-size policy for trace evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    /// Largest tolerated change of any sampled probability under `dt → dt/2`.
    pub accuracy: f64,
    /// Smallest step the controller may select, s.
    pub min_dt: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { accuracy: DEFAULT_ACCURACY, min_dt: 1e-10 }
    }
}

/// Upper bound on the step: 1/50 of the shorter of the drive period and the
/// inverse of the largest angular gap reached during the drive.
pub fn step_bound(drive: &DriveParams, coupling: f64) -> f64 {
    let max_detuning = (angular(drive.static_detuning)).abs() + drive.sweep_amplitude();
    let max_gap = max_detuning.hypot(angular(coupling));
    let scale = if max_gap > 0.0 { drive.period().min(1.0 / max_gap) } else { drive.period() };
    scale / STEPS_PER_SCALE
}

/// Picks a step over a two-period probe horizon.
pub fn choose_step(drive: &DriveParams, coupling: f64, accuracy: f64) -> Result<f64> {
    choose_step_over(drive, coupling, accuracy, 2.0 * drive.period(), StepControl::default().min_dt)
}

/// Halves the step from [`step_bound`] until halving it once more changes the
/// excited population at every probe time in `(0, horizon]` by less than
/// `accuracy`.
pub fn choose_step_over(drive: &DriveParams, coupling: f64, accuracy: f64, horizon: f64, min_dt: f64) -> Result<f64> {
    if !(accuracy > 0.0 && accuracy <= 1e-3) {
        return Err(Error::invalid("accuracy", format!("must lie in (0, 1e-3], got {accuracy}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("horizon", format!("must be finite and > 0, got {horizon}")));
    }
    const PROBES: usize = 16;
    let probes: Vec<f64> = (1..=PROBES).map(|k| horizon * k as f64 / PROBES as f64).collect();
    let coupling = coupling.abs();

    let mut dt = step_bound(drive, coupling);
    let mut coarse = probe_populations(drive, coupling, &probes, dt);
    loop {
        if dt < min_dt {
            return Err(Error::StepTooCoarse { target: accuracy, min_dt });
        }
        let fine = probe_populations(drive, coupling, &probes, 0.5 * dt);
        let change = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if change < accuracy {
            return Ok(dt);
        }
        dt *= 0.5;
        coarse = fine;
    }
}

fn probe_populations(drive: &DriveParams, coupling: f64, probes: &[f64], dt: f64) -> Vec<f64> {
    let mut psi = QubitState::ground();
    let mut t = 0.0;
    probes
        .iter()
        .map(|&target| {
            let (n, h) = substeps(target - t, dt);
            for _ in 0..n {
                psi = step(&psi, t, h, drive, coupling);
                t += h;
            }
            t = target;
            psi.p_e()
        })
        .collect()
}

/// Splits `span` into equal substeps no longer than `dt`.
#[inline]
fn substeps(span: f64, dt: f64) -> (usize, f64) {
    if span <= 0.0 {
        return (0, 0.0);
    }
    let n = (span / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (n, span / n as f64)
}

fn check_sample_times(sample_times: &[f64]) -> Result<()> {
    if sample_times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::invalid("sample_times", "must be finite and ≥ 0"));
    }
    if sample_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("sample_times", "must be sorted"));
    }
    Ok(())
}

/// Evolves `initial` from `t = 0` and records populations at `sample_times`.
///
/// `detuning_offset` adds a time-dependent detuning (Hz) to the drive; it is
/// evaluated at step midpoints. Negative couplings are handled through
/// `|coupling|`: flipping the sign of `Ω` is the gauge transform `σz`, which
/// leaves both recorded populations unchanged.
pub fn evolve_trace<F>(
    initial: &QubitState,
    drive: &DriveParams,
    coupling: f64,
    detuning_offset: F,
    sample_times: &[f64],
    control: &StepControl,
) -> Result<Trace>
where
    F: Fn(f64) -> f64,
{
    check_sample_times(sample_times)?;
    let Some(&horizon) = sample_times.last() else {
        return Ok(Trace::default());
    };
    let coupling = coupling.abs();
    let dt = if horizon > 0.0 {
        choose_step_over(drive, coupling, control.accuracy, horizon, control.min_dt)?
    } else {
        step_bound(drive, coupling)
    };
    let omega = angular(coupling);

    let mut psi = *initial;
    let mut t = 0.0;
    let mut samples = Vec::with_capacity(sample_times.len());
    for &target in sample_times {
        let (n, h) = substeps(target - t, dt);
        for _ in 0..n {
            let mid = t + 0.5 * h;
            let detuning = effective_detuning(mid, drive, detuning_offset(mid));
            psi = Unitary2::evolution(detuning, omega, h).apply(&psi);
            t += h;
        }
        t = target;
        let frame = EigenFrame::from_angular(effective_detuning(t, drive, detuning_offset(t)), omega);
        samples.push(TraceSample { t, p_e: psi.p_e(), p_plus: frame.p_plus(&psi) });
    }
    Ok(Trace { samples })
}

/// Evolves `|g⟩` for many couplings at once under one drive and a constant
/// detuning offset, with a fixed step `dt`. Returns one trace per coupling.
///
/// The detuning is evaluated once per step and shared across couplings.
pub fn evolve_many(
    drive: &DriveParams,
    couplings: &[f64],
    offset_hz: f64,
    sample_times: &[f64],
    dt: f64,
) -> Result<Vec<Trace>> {
    check_sample_times(sample_times)?;
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
    }
    let omegas: Vec<f64> = couplings.iter().map(|g| angular(g.abs())).collect();
    let mut states = vec![QubitState::ground(); couplings.len()];
    let mut traces: Vec<Trace> =
        (0..couplings.len()).map(|_| Trace { samples: Vec::with_capacity(sample_times.len()) }).collect();

    let mut t = 0.0;
    for &target in sample_times {
        let (n, h) = substeps(target - t, dt);
        for _ in 0..n {
            let detuning = effective_detuning(t + 0.5 * h, drive, offset_hz);
            for (psi, &omega) in states.iter_mut().zip(&omegas) {
                *psi = Unitary2::evolution(detuning, omega, h).apply(psi);
            }
            t += h;
        }
        t = target;
        let detuning = effective_detuning(t, drive, offset_hz);
        for ((psi, &omega), trace) in states.iter().zip(&omegas).zip(traces.iter_mut()) {
            let frame = EigenFrame::from_angular(detuning, omega);
            trace.samples.push(TraceSample { t, p_e: psi.p_e(), p_plus: frame.p_plus(psi) });
        }
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn no_offset(_: f64) -> f64 {
        0.0
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let d = DriveParams::new(0.0, 0.0, 100.0, 0.0).unwrap();
        let psi = QubitState::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)).unwrap();
        let out = step(&psi, 0.0, 1e-3, &d, 0.0);
        assert!((out.fidelity(&psi) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn resonant_pi_pulse() {
        let g = 250.0;
        let d = DriveParams::new(g, 0.0, 100.0, 0.0).unwrap();
        let total = 1.0 / (2.0 * g);
        let n = 1000;
        let mut psi = QubitState::ground();
        for k in 0..n {
            psi = step(&psi, k as f64 * total / n as f64, total / n as f64, &d, g);
        }
        assert!((psi.p_e() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn uncoupled_trace_stays_in_ground() {
        let d = DriveParams::new(0.0, 13.3, 200.0, 0.0).unwrap();
        let ts: Vec<f64> = (1..=50).map(|k| k as f64 * 1e-4).collect();
        let tr = evolve_trace(&QubitState::ground(), &d, 0.0, no_offset, &ts, &StepControl::default()).unwrap();
        assert!(tr.samples.iter().all(|s| s.p_e == 0.0));
    }

    #[test]
    fn rabi_extrema() {
        let g = 320.0;
        let d = DriveParams::new(g, 0.0, 62.5, 0.0).unwrap();
        let ts: Vec<f64> = (1..=12).map(|k| k as f64 / 640.0).collect();
        let tr = evolve_trace(&QubitState::ground(), &d, g, no_offset, &ts, &StepControl::default()).unwrap();
        for (k, s) in tr.samples.iter().enumerate() {
            let expected = if k % 2 == 0 { 1.0 } else { 0.0 };
            assert!((s.p_e - expected).abs() < 1e-6, "k={k} p_e={}", s.p_e);
        }
    }

    #[test]
    fn detuned_rabi_closed_form() {
        let (g, delta) = (180.0, 75.0);
        let d = DriveParams::new(g, 0.0, 62.5, delta).unwrap();
        let ts: Vec<f64> = (1..=40).map(|k| k as f64 * 3.3e-4).collect();
        let tr = evolve_trace(&QubitState::ground(), &d, g, no_offset, &ts, &StepControl::default()).unwrap();
        let rate = (g * g + delta * delta).sqrt();
        for s in &tr.samples {
            let exact = g * g / (rate * rate) * (PI * rate * s.t).sin().powi(2);
            assert!((s.p_e - exact).abs() < 1e-8, "t={} {} vs {}", s.t, s.p_e, exact);
        }
    }

    #[test]
    fn step_control_validation() {
        let d = DriveParams::new(100.0, 0.0, 62.5, 0.0).unwrap();
        assert!(matches!(choose_step(&d, 100.0, 0.0), Err(Error::InvalidParameter { .. })));
        assert!(choose_step(&d, 100.0, 1e-2).is_err());
        let dt = choose_step(&d, 100.0, 1e-6).unwrap();
        assert!(dt <= (1.0 / TAU_100) / 50.0 + 1e-18);
    }
    const TAU_100: f64 = 2.0 * PI * 100.0;

    #[test]
    fn step_too_coarse_when_min_dt_is_large() {
        let d = DriveParams::new(120.0, 13.3, 200.0, 0.0).unwrap();
        let ctl = StepControl { accuracy: 1e-9, min_dt: 1e-4 };
        let r = evolve_trace(&QubitState::ground(), &d, 120.0, no_offset, &[0.01], &ctl);
        assert!(matches!(r, Err(Error::StepTooCoarse { .. })));
    }

    #[test]
    fn unsorted_samples_rejected() {
        let d = DriveParams::new(120.0, 0.0, 200.0, 0.0).unwrap();
        let r = evolve_trace(&QubitState::ground(), &d, 120.0, no_offset, &[0.02, 0.01], &StepControl::default());
        assert!(r.is_err());
    }

    #[test]
    fn evolve_many_matches_single_traces() {
        let d = DriveParams::new(120.0, 13.3, 200.0, 0.0).unwrap();
        let ts: Vec<f64> = (1..=20).map(|k| k as f64 * 5e-4).collect();
        let dt = step_bound(&d, 120.0);
        let many = evolve_many(&d, &[120.0, -90.0], 0.0, &ts, dt).unwrap();
        let single = evolve_many(&d, &[90.0], 0.0, &ts, dt).unwrap();
        assert_eq!(many[1], single[0]);
    }

    #[test]
    fn unitary_adjoint_inverts() {
        let u = Unitary2::evolution(3.0, 1.5, 0.7);
        assert!(u.unitarity_defect() < 1e-15);
        let p = u.adjoint().mul(&u);
        assert!((p.a.re - 1.0).abs() < 1e-15 && p.b.norm() < 1e-15);
    }
}

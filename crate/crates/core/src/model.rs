//! The driven two-level clock Hamiltonian.
//!
//! In the diabatic basis `(|g⟩, |e⟩)` the rotating-frame Hamiltonian is
//!
//! ```text
//! H(t)/ħ = ½ [ −Δ(t)   Ω  ]      Δ(t) = 2π(δ + δ_extra) + A·ωs·cos(ωs·t + φ₀)
//!            [   Ω    Δ(t) ]      Ω    = 2π·g
//! ```
//!
//! so `|e⟩` is the upper level whenever `Δ > 0`. Frequencies enter the
//! public API in Hz and are converted to angular units here.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the frequency-modulated drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    /// Bare clock Rabi coupling `g`, Hz.
    pub g_bare: f64,
    /// Modulation index `A`.
    pub amplitude: f64,
    /// Modulation angular frequency `ωs`, rad/s.
    pub mod_freq: f64,
    /// Static laser detuning `δ = ω₀ − ω_p`, Hz.
    pub static_detuning: f64,
    /// Phase of the cosine drive at `t = 0`, rad.
    pub initial_phase: f64,
}

impl DriveParams {
    /// Builds a drive from a modulation frequency given in Hz.
    pub fn new(g_bare: f64, amplitude: f64, mod_freq_hz: f64, static_detuning: f64) -> Result<Self> {
        let drive = DriveParams {
            g_bare,
            amplitude,
            mod_freq: TAU * mod_freq_hz,
            static_detuning,
            initial_phase: 0.0,
        };
        drive.validate()?;
        Ok(drive)
    }

    pub fn with_phase(mut self, initial_phase: f64) -> Self {
        self.initial_phase = initial_phase;
        self
    }

    /// Same drive with `offset_hz` added to the static detuning.
    pub fn with_offset(mut self, offset_hz: f64) -> Self {
        self.static_detuning += offset_hz;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g_bare >= 0.0 && self.g_bare.is_finite()) {
            return Err(Error::invalid("g_bare", format!("must be finite and ≥ 0, got {}", self.g_bare)));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::invalid("amplitude", format!("must be finite and ≥ 0, got {}", self.amplitude)));
        }
        if !(self.mod_freq > 0.0 && self.mod_freq.is_finite()) {
            return Err(Error::invalid("mod_freq", format!("must be finite and > 0, got {}", self.mod_freq)));
        }
        if !self.static_detuning.is_finite() || !self.initial_phase.is_finite() {
            return Err(Error::invalid("static_detuning", "detuning and phase must be finite"));
        }
        Ok(())
    }

    pub fn mod_freq_hz(&self) -> f64 {
        self.mod_freq / TAU
    }

    /// Modulation period `2π/ωs`, s.
    pub fn period(&self) -> f64 {
        TAU / self.mod_freq
    }

    /// Peak angular excursion of the detuning, `A·ωs`.
    pub fn sweep_amplitude(&self) -> f64 {
        self.amplitude * self.mod_freq
    }

    /// Phase of the cosine drive at time `t`.
    #[inline]
    pub fn drive_phase(&self, t: f64) -> f64 {
        self.mod_freq * t + self.initial_phase
    }

    /// True when the detuning passes through zero twice per period.
    pub fn has_crossings(&self) -> bool {
        self.amplitude > 0.0 && (TAU * self.static_detuning).abs() < self.sweep_amplitude()
    }
}

/// Angular detuning `2π(δ + extra_offset) + A·ωs·cos(ωs·t + φ₀)`, rad/s.
#[inline]
pub fn effective_detuning(t: f64, drive: &DriveParams, extra_offset: f64) -> f64 {
    TAU * (drive.static_detuning + extra_offset) + drive.sweep_amplitude() * drive.drive_phase(t).cos()
}

/// Time derivative of [`effective_detuning`], rad/s².
#[inline]
pub fn detuning_rate(t: f64, drive: &DriveParams) -> f64 {
    -drive.sweep_amplitude() * drive.mod_freq * drive.drive_phase(t).sin()
}

/// Angular coupling `2π·g` for a coupling in Hz.
#[inline]
pub fn angular(coupling_hz: f64) -> f64 {
    TAU * coupling_hz
}

/// All zeros of the effective detuning inside `[start, end]`, increasing.
pub fn crossing_times(drive: &DriveParams, start: f64, end: f64) -> Result<Vec<f64>> {
    if !drive.has_crossings() {
        return Err(Error::NoCrossing {
            detuning: TAU * drive.static_detuning,
            sweep_amplitude: drive.sweep_amplitude(),
        });
    }
    if !(end >= start) {
        return Err(Error::invalid("window", format!("end {end} precedes start {start}")));
    }
    let w = drive.mod_freq;
    let root = (-TAU * drive.static_detuning / drive.sweep_amplitude()).acos();
    let phase_lo = drive.drive_phase(start);
    let phase_hi = drive.drive_phase(end);
    let k_lo = ((phase_lo - PI) / TAU).floor() as i64 - 1;
    let k_hi = ((phase_hi + PI) / TAU).ceil() as i64 + 1;

    let mut times = Vec::new();
    for k in k_lo..=k_hi {
        for branch in [-root, root] {
            let guess = (branch + TAU * k as f64 - drive.initial_phase) / w;
            let t = newton_polish(drive, guess);
            if t >= start && t <= end {
                times.push(t);
            }
        }
    }
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    Ok(times)
}

fn newton_polish(drive: &DriveParams, guess: f64) -> f64 {
    let slope = detuning_rate(guess, drive);
    if slope == 0.0 {
        return guess;
    }
    guess - effective_detuning(guess, drive, 0.0) / slope
}

/// Normalized amplitudes in the diabatic basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitState {
    pub amp_g: Complex64,
    pub amp_e: Complex64,
}

impl QubitState {
    pub fn ground() -> Self {
        QubitState { amp_g: Complex64::new(1.0, 0.0), amp_e: Complex64::new(0.0, 0.0) }
    }

    pub fn excited() -> Self {
        QubitState { amp_g: Complex64::new(0.0, 0.0), amp_e: Complex64::new(1.0, 0.0) }
    }

    /// Normalizes the given amplitudes; fails on the zero vector.
    pub fn new(amp_g: Complex64, amp_e: Complex64) -> Result<Self> {
        let norm = (amp_g.norm_sqr() + amp_e.norm_sqr()).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::invalid("state", "amplitudes must have finite nonzero norm"));
        }
        Ok(QubitState { amp_g: amp_g / norm, amp_e: amp_e / norm })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp_g.norm_sqr() + self.amp_e.norm_sqr()
    }

    /// Excited-state population `|⟨e|ψ⟩|²`.
    pub fn p_e(&self) -> f64 {
        self.amp_e.norm_sqr()
    }

    pub fn p_g(&self) -> f64 {
        self.amp_g.norm_sqr()
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &QubitState) -> f64 {
        (self.amp_g.conj() * other.amp_g + self.amp_e.conj() * other.amp_e).norm_sqr()
    }
}

/// Instantaneous eigenbasis of the Hamiltonian.
///
/// With mixing angle `θ`, the adiabatic states are
/// `|+⟩ = sin(θ/2)|g⟩ + cos(θ/2)|e⟩` and `|−⟩ = cos(θ/2)|g⟩ − sin(θ/2)|e⟩`.
/// This gauge is real and continuous through a crossing, and `|+⟩` is always
/// the upper level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenFrame {
    /// `θ = atan2(Ω, Δ)`, in `[0, π]`.
    pub mixing_angle: f64,
    /// Level splitting `√(Δ² + Ω²)`, rad/s.
    pub gap: f64,
}

impl EigenFrame {
    /// Frame for angular detuning and angular coupling; no degeneracy check.
    #[inline]
    pub fn from_angular(detuning: f64, coupling: f64) -> Self {
        EigenFrame { mixing_angle: coupling.atan2(detuning), gap: detuning.hypot(coupling) }
    }

    /// Population of the upper adiabatic state.
    #[inline]
    pub fn p_plus(&self, state: &QubitState) -> f64 {
        let (s, c) = (0.5 * self.mixing_angle).sin_cos();
        (state.amp_g * s + state.amp_e * c).norm_sqr()
    }

    /// Population of the lower adiabatic state.
    #[inline]
    pub fn p_minus(&self, state: &QubitState) -> f64 {
        let (s, c) = (0.5 * self.mixing_angle).sin_cos();
        (state.amp_g * c - state.amp_e * s).norm_sqr()
    }

    /// Adiabatic amplitudes `(⟨−|ψ⟩, ⟨+|ψ⟩)`.
    pub fn to_adiabatic(&self, state: &QubitState) -> (Complex64, Complex64) {
        let (s, c) = (0.5 * self.mixing_angle).sin_cos();
        (state.amp_g * c - state.amp_e * s, state.amp_g * s + state.amp_e * c)
    }

    /// Diabatic state from adiabatic amplitudes `(minus, plus)`.
    pub fn to_diabatic(&self, minus: Complex64, plus: Complex64) -> QubitState {
        let (s, c) = (0.5 * self.mixing_angle).sin_cos();
        QubitState { amp_g: minus * c + plus * s, amp_e: -minus * s + plus * c }
    }
}

/// Eigenframe at time `t` for a coupling in Hz.
pub fn eigen_frame(t: f64, drive: &DriveParams, coupling: f64) -> Result<EigenFrame> {
    eigen_frame_with_offset(t, drive, coupling, 0.0)
}

pub fn eigen_frame_with_offset(t: f64, drive: &DriveParams, coupling: f64, offset_hz: f64) -> Result<EigenFrame> {
    if !(coupling >= 0.0) {
        return Err(Error::invalid("coupling", format!("must be ≥ 0, got {coupling}")));
    }
    let detuning = effective_detuning(t, drive, offset_hz);
    if coupling == 0.0 && detuning == 0.0 {
        return Err(Error::DegenerateFrame { time: t });
    }
    Ok(EigenFrame::from_angular(detuning, angular(coupling)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn drive(g: f64, a: f64, fs: f64, delta: f64) -> DriveParams {
        DriveParams::new(g, a, fs, delta).unwrap()
    }

    #[test]
    fn detuning_examples() {
        let d = drive(100.0, 0.0, 200.0, 5.0);
        assert_relative_eq!(effective_detuning(0.0, &d, 0.0), TAU * 5.0, max_relative = 1e-15);

        let d = drive(100.0, 3.0, 200.0, 0.0);
        let quarter = (PI / 2.0) / d.mod_freq;
        assert!(effective_detuning(quarter, &d, 0.0).abs() < 1e-9);

        let d = drive(120.0, 13.3, 200.0, 0.0);
        assert_relative_eq!(effective_detuning(0.0, &d, 0.0), 16713.2729170977, max_relative = 1e-12);
    }

    #[test]
    fn offset_adds_to_static_detuning() {
        let d = drive(100.0, 2.0, 50.0, 1.5);
        let t = 3.7e-3;
        assert_relative_eq!(
            effective_detuning(t, &d, 2.5),
            effective_detuning(t, &d.with_offset(2.5), 0.0),
            max_relative = 1e-14
        );
    }

    #[test]
    fn zero_detuning_crossings() {
        let d = drive(120.0, 13.3, 200.0, 0.0);
        let ts = crossing_times(&d, 0.0, 5e-3).unwrap();
        assert_eq!(ts.len(), 2);
        assert!((ts[0] - 1.25e-3).abs() < 1e-9);
        assert!((ts[1] - 3.75e-3).abs() < 1e-9);
    }

    #[test]
    fn unmodulated_drive_has_no_crossing() {
        let d = drive(120.0, 0.0, 200.0, 0.0);
        assert!(matches!(crossing_times(&d, 0.0, 1.0), Err(Error::NoCrossing { .. })));
        let d = drive(120.0, 1.0, 200.0, 300.0);
        assert!(matches!(crossing_times(&d, 0.0, 1.0), Err(Error::NoCrossing { .. })));
    }

    #[test]
    fn offset_crossing_matches_bisection() {
        // 2πδ/(Aωs) = −1/√2 puts the first zero at ωs·t = π/4.
        let a = 5.0;
        let fs = 200.0;
        let w = TAU * fs;
        let delta = -a * w / TAU / 2f64.sqrt();
        let d = drive(50.0, a, fs, delta);
        let ts = crossing_times(&d, 0.0, 2e-3).unwrap();
        assert!((ts[0] - (PI / 4.0) / w).abs() < 1e-9);
        assert!((ts[0] - 0.625e-3).abs() < 1e-9);

        // bisection on the detuning itself
        let (mut lo, mut hi) = (0.0, 1e-3);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if effective_detuning(lo, &d, 0.0) * effective_detuning(mid, &d, 0.0) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((ts[0] - 0.5 * (lo + hi)).abs() < 1e-12);
    }

    #[test]
    fn crossings_alternate_slope_sign() {
        let d = drive(10.0, 4.0, 37.0, 20.0).with_phase(0.3);
        let ts = crossing_times(&d, 0.0, 0.2).unwrap();
        assert!(ts.len() > 6);
        for pair in ts.windows(2) {
            assert!(pair[1] > pair[0]);
            assert!(detuning_rate(pair[0], &d) * detuning_rate(pair[1], &d) < 0.0);
        }
    }

    #[test]
    fn frame_examples() {
        let d = drive(0.0, 1.0, 100.0, 0.0);
        let t = crossing_times(&d, 0.0, 0.01).unwrap()[0];
        let f = eigen_frame(t, &d, 40.0).unwrap();
        assert_relative_eq!(f.mixing_angle, PI / 2.0, epsilon = 1e-9);

        let d = drive(0.0, 0.0, 100.0, 50.0);
        let f = eigen_frame(0.0, &d, 1e-9).unwrap();
        assert!(f.mixing_angle < 1e-10);

        let f = eigen_frame(0.0, &d, 50.0).unwrap();
        assert_relative_eq!(f.mixing_angle, PI / 4.0, epsilon = 1e-14);
        assert_relative_eq!(f.gap, 2f64.sqrt() * TAU * 50.0, max_relative = 1e-14);
    }

    #[test]
    fn degenerate_frame_is_an_error() {
        let d = drive(0.0, 0.0, 100.0, 0.0);
        assert!(matches!(eigen_frame(0.0, &d, 0.0), Err(Error::DegenerateFrame { .. })));
        assert!(eigen_frame(0.0, &d, -1.0).is_err());
    }

    #[test]
    fn adiabatic_round_trip() {
        let f = EigenFrame::from_angular(3.0, 2.0);
        let psi = QubitState::new(Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.9)).unwrap();
        let (m, p) = f.to_adiabatic(&psi);
        let back = f.to_diabatic(m, p);
        assert!((back.fidelity(&psi) - 1.0).abs() < 1e-14);
        assert_relative_eq!(f.p_plus(&psi) + f.p_minus(&psi), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn invalid_drive_rejected() {
        assert!(DriveParams::new(-1.0, 1.0, 10.0, 0.0).is_err());
        assert!(DriveParams::new(1.0, -1.0, 10.0, 0.0).is_err());
        assert!(DriveParams::new(1.0, 1.0, 0.0, 0.0).is_err());
    }
}

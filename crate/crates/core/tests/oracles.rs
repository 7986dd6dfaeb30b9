//! Reference values from an independent high-order integration of the same
//! Hamiltonian (explicit Runge-Kutta 8(5,3), relative tolerance 1e-12), frozen
//! here and compared against the propagator and the harness.

use lzro_core::analysis::{fit_exponential, fringe_contrast};
use lzro_core::experiment::{preset, run_scenario, Motion, Scenario};
use lzro_core::lattice::{thermal_weights, LatticeConfig};
use lzro_core::model::{DriveParams, QubitState};
use lzro_core::propagator::{evolve_trace, StepControl, Trace, TraceSample};

const TOL: f64 = 2e-5;

fn trace_at(drive: &DriveParams, times: &[f64]) -> Trace {
    evolve_trace(&QubitState::ground(), drive, drive.g_bare, |_| 0.0, times, &StepControl::default()).unwrap()
}

fn assert_close(label: &str, got: &[f64], want: &[f64], tol: f64) {
    assert_eq!(got.len(), want.len());
    for (k, (g, w)) in got.iter().zip(want).enumerate() {
        assert!((g - w).abs() < tol, "{label}[{k}]: got {g}, reference {w}");
    }
}

fn slow_mid_plateau_times() -> Vec<f64> {
    (1..=7).map(|k| 8e-3 * k as f64).collect()
}

#[test]
fn slow_destructive_mid_plateau_populations() {
    let drive = DriveParams::new(320.0, 20.6, 62.5, 0.0).unwrap();
    let tr = trace_at(&drive, &slow_mid_plateau_times());
    assert_close(
        "p_e",
        &tr.p_e(),
        &[0.9466815594, 0.1225244576, 0.9101723018, 0.0108788557, 0.9799491871, 0.1017326718, 0.883100112],
        TOL,
    );
    assert_close(
        "p_plus",
        &tr.p_plus(),
        &[0.1004857777, 0.2117519084, 0.1591836193, 0.0322534388, 0.0469996738, 0.1783238676, 0.2027089939],
        TOL,
    );
}

#[test]
fn slow_constructive_mid_plateau_populations() {
    let drive = DriveParams::new(320.0, 22.2, 62.5, 0.0).unwrap();
    let tr = trace_at(&drive, &slow_mid_plateau_times());
    assert_close(
        "p_e",
        &tr.p_e(),
        &[0.6990392353, 0.3954222132, 0.9703517325, 0.1861566414, 0.555455079, 0.1107476467, 0.9186110817],
        TOL,
    );
    assert_close(
        "p_plus",
        &tr.p_plus(),
        &[0.2310012643, 0.2994905535, 0.0342860924, 0.1477625153, 0.3351069811, 0.0930872109, 0.07180066],
        TOL,
    );
}

#[test]
fn fast_constructive_staircase_levels() {
    let drive = DriveParams::new(120.0, 13.3, 200.0, 0.0).unwrap();
    let times: Vec<f64> = (1..=11).map(|k| 2.5e-3 * k as f64).collect();
    let tr = trace_at(&drive, &times);
    assert_close(
        "p_e",
        &tr.p_e(),
        &[
            0.0429707636, 0.1590562394, 0.3346484312, 0.5348791223, 0.7321555593, 0.8880056499, 0.9822126027,
            0.9934342561, 0.9254907599, 0.7839890149, 0.5981314773,
        ],
        TOL,
    );
    let end = trace_at(&drive, &[30e-3]);
    assert!((end.p_e()[0] - 0.3931221129).abs() < TOL);
}

#[test]
fn fast_destructive_peak() {
    let drive = DriveParams::new(120.0, 11.55, 200.0, 0.0).unwrap();
    // the reference maximum sits at 28.44 ms; the peak is flat to 1e-4 over ±0.01 ms
    let tr = trace_at(&drive, &[28.44e-3]);
    assert!((tr.p_e()[0] - 0.3009259989).abs() < 1e-4, "{}", tr.p_e()[0]);
}

#[test]
fn harness_reproduces_staircase() {
    let res = run_scenario(&preset("fast-constructive").unwrap()).unwrap();
    let at = |t: f64| res.points.iter().find(|p| (p.x - t).abs() < 1e-12).unwrap().p_e_mean;
    assert!((at(12.5e-3) - 0.7321555593).abs() < TOL);
    assert!((at(30e-3) - 0.3931221129).abs() < TOL);
}

/// Exact Rabi mode sum over the full (uncompressed) thermal ensemble.
fn exact_rabi_ensemble(g: f64, times: &[f64]) -> Trace {
    let modes = thermal_weights(&LatticeConfig::default(), g).unwrap();
    let total: f64 = modes.iter().map(|m| m.weight).sum();
    let samples = times
        .iter()
        .map(|&t| {
            let p: f64 = modes
                .iter()
                .map(|m| m.weight * (std::f64::consts::PI * m.coupling * t).sin().powi(2))
                .sum::<f64>()
                / total;
            TraceSample { t, p_e: p, p_plus: 0.0 }
        })
        .collect();
    Trace { samples }
}

#[test]
fn compressed_ensemble_matches_mode_sum() {
    let mut sc: Scenario = preset("rabi-320").unwrap();
    sc.noise = false;
    sc.scan_points.truncate(161);
    let res = run_scenario(&sc).unwrap();
    let exact = exact_rabi_ensemble(320.0, &sc.scan_points);
    let dev = res.p_e().iter().zip(exact.p_e()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(dev < 5e-3, "max deviation {dev}");
}

#[test]
fn rabi_decay_constant_from_mode_sum() {
    // decay constant of the noise-free rabi-320 contrast from an untruncated
    // mode sum (60 axial × 4000 radial levels); truncation to 0.999 coverage
    // shifts it by about 1e-4 relative
    let times: Vec<f64> = (0..=512).map(|k| k as f64 * 0.125e-3).collect();
    let exact = exact_rabi_ensemble(320.0, &times);
    let v_exact = fit_exponential(&fringe_contrast(&exact, 1.0 / 320.0).unwrap()).unwrap().param("v").unwrap();
    assert!(((v_exact - 4.50179e-3) / 4.50179e-3).abs() < 1e-3, "{v_exact}");

    let mut sc = preset("rabi-320").unwrap();
    sc.noise = false;
    sc.motion = Motion::Thermal;
    let res = run_scenario(&sc).unwrap();
    let v = fit_exponential(&fringe_contrast(&res.trace(), 1.0 / 320.0).unwrap()).unwrap().param("v").unwrap();
    assert!(((v - v_exact) / v_exact).abs() < 0.01, "compressed {v} vs exact {v_exact}");
}

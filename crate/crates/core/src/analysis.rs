//! Fringe contrast and the decay fits applied to it.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagator::Trace;

/// Minimum samples a contrast window must hold.
pub const MIN_SAMPLES_PER_WINDOW: usize = 20;

const MAX_ITERATIONS: usize = 200;
const RELATIVE_TOLERANCE: f64 = 1e-9;
const MAX_DAMPING: f64 = 1e20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastPoint {
    /// Window centre, s.
    pub t: f64,
    pub contrast: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContrastSeries {
    pub points: Vec<ContrastPoint>,
}

impl ContrastSeries {
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        ContrastSeries { points: pairs.iter().map(|&(t, contrast)| ContrastPoint { t, contrast }).collect() }
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.contrast).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParam {
    pub name: String,
    pub value: f64,
    /// One-sigma uncertainty from the covariance diagonal.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub params: Vec<FitParam>,
    pub residual_rms: f64,
    /// Row-major covariance in `params` order. Infinite entries mark
    /// parameters the data cannot identify.
    pub covariance: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Residual rms after the initial guess and after each accepted step.
    pub rms_history: Vec<f64>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub fn stderr(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.stderr)
    }
}

/// Peak-to-peak excited population in consecutive windows of length
/// `period`, starting at the first sample. Only complete windows are kept.
pub fn fringe_contrast(trace: &Trace, period: f64) -> Result<ContrastSeries> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::invalid("period", format!("must be > 0, got {period}")));
    }
    let (Some(first), Some(last)) = (trace.samples.first(), trace.samples.last()) else {
        return Err(Error::TooSparse { window: 0, samples: 0, required: MIN_SAMPLES_PER_WINDOW });
    };
    let t0 = first.t;
    // tolerance keeps grid points that sit on a boundary in the later window
    let slack = 1e-9;
    let n_windows = ((last.t - t0) / period + slack).floor() as usize;
    if n_windows == 0 {
        return Err(Error::TooSparse { window: 0, samples: trace.len(), required: MIN_SAMPLES_PER_WINDOW });
    }
    let mut extrema = vec![(f64::INFINITY, f64::NEG_INFINITY, 0usize); n_windows];
    for s in &trace.samples {
        let k = ((s.t - t0) / period + slack).floor() as usize;
        if k < n_windows {
            let w = &mut extrema[k];
            w.0 = w.0.min(s.p_e);
            w.1 = w.1.max(s.p_e);
            w.2 += 1;
        }
    }
    let mut points = Vec::with_capacity(n_windows);
    for (window, &(lo, hi, count)) in extrema.iter().enumerate() {
        if count < MIN_SAMPLES_PER_WINDOW {
            return Err(Error::TooSparse { window, samples: count, required: MIN_SAMPLES_PER_WINDOW });
        }
        points.push(ContrastPoint { t: t0 + (window as f64 + 0.5) * period, contrast: (hi - lo).clamp(0.0, 1.0) });
    }
    Ok(ContrastSeries { points })
}

fn checked_data(series: &ContrastSeries, min_points: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if series.len() < min_points {
        return Err(Error::invalid("series", format!("need at least {min_points} points, got {}", series.len())));
    }
    let t = series.times();
    let y = series.values();
    if t.iter().chain(&y).any(|v| !v.is_finite()) {
        return Err(Error::FitDiverged { iterations: 0, reason: "non-finite input data".into() });
    }
    Ok((t, y))
}

fn exp_model(p: &Vector3<f64>, t: f64) -> f64 {
    p[0] + p[1] * (-t / p[2]).exp()
}

fn sum_sq(p: &Vector3<f64>, t: &[f64], y: &[f64]) -> f64 {
    let s: f64 = t.iter().zip(y).map(|(&ti, &yi)| (yi - exp_model(p, ti)).powi(2)).sum();
    if s.is_finite() && p[2] != 0.0 {
        s
    } else {
        f64::INFINITY
    }
}

fn covariance_from(jtj: &DMatrix<f64>, sigma2: f64) -> Vec<Vec<f64>> {
    let n = jtj.nrows();
    let scale = jtj.diagonal().amax();
    // reciprocal condition proxy: tiny pivots mean an unidentifiable parameter
    let inverse = if scale > 0.0 {
        let svd = jtj.clone().svd(true, true);
        let smallest = svd.singular_values.min();
        if smallest > 1e-13 * scale {
            svd.pseudo_inverse(0.0).ok()
        } else {
            None
        }
    } else {
        None
    };
    match inverse {
        Some(inv) => (0..n).map(|i| (0..n).map(|j| sigma2 * inv[(i, j)]).collect()).collect(),
        None => vec![vec![f64::INFINITY; n]; n],
    }
}

fn params_with_errors(names: &[&str], values: &[f64], cov: &[Vec<f64>]) -> Vec<FitParam> {
    names
        .iter()
        .zip(values)
        .enumerate()
        .map(|(i, (name, &value))| FitParam { name: name.to_string(), value, stderr: cov[i][i].max(0.0).sqrt() })
        .collect()
}

/// Fits `offset + D·exp(−t/v)` by Levenberg-Marquardt.
pub fn fit_exponential(series: &ContrastSeries) -> Result<FitResult> {
    let (t, y) = checked_data(series, 4)?;
    let n = t.len();
    let y_min = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = t[n - 1] - t[0];
    if !(span > 0.0) {
        return Err(Error::invalid("series", "times must span a positive interval"));
    }
    let mut p = Vector3::new(y_min, y_max - y_min, 0.5 * span);
    let mut cost = sum_sq(&p, &t, &y);
    let mut history = vec![(cost / n as f64).sqrt()];
    let mut lambda = 1e-3;
    let mut iterations = 0;

    let jacobian = |p: &Vector3<f64>| -> (Matrix3<f64>, Vector3<f64>) {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (&ti, &yi) in t.iter().zip(&y) {
            let e = (-ti / p[2]).exp();
            let row = Vector3::new(1.0, e, p[1] * e * ti / (p[2] * p[2]));
            let r = yi - (p[0] + p[1] * e);
            jtj += row * row.transpose();
            jtr += row * r;
        }
        (jtj, jtr)
    };

    'outer: while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = jacobian(&p);
        if cost == 0.0 || jtr.amax() == 0.0 {
            break;
        }
        loop {
            let mut a = jtj;
            let diag_floor = 1e-12 * jtj.diagonal().amax().max(f64::MIN_POSITIVE);
            for i in 0..3 {
                a[(i, i)] += lambda * jtj[(i, i)].max(diag_floor);
            }
            let Some(delta) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                if lambda > MAX_DAMPING {
                    return Err(Error::FitDiverged { iterations, reason: "damped normal equations singular".into() });
                }
                continue;
            };
            let relative = (0..3).map(|i| delta[i].abs() / p[i].abs().max(1e-300)).fold(0.0, f64::max);
            let trial = p + delta;
            let trial_cost = sum_sq(&trial, &t, &y);
            if trial_cost < cost {
                p = trial;
                cost = trial_cost;
                history.push((cost / n as f64).sqrt());
                lambda = (lambda / 10.0).max(1e-15);
                if relative < RELATIVE_TOLERANCE {
                    break 'outer;
                }
                break;
            }
            if relative < RELATIVE_TOLERANCE {
                // already at the minimum to working precision
                break 'outer;
            }
            lambda *= 10.0;
            if lambda > MAX_DAMPING {
                return Err(Error::FitDiverged { iterations, reason: "damping exhausted without residual decrease".into() });
            }
        }
    }

    let (jtj, _) = jacobian(&p);
    let dof = n.saturating_sub(3).max(1) as f64;
    let cov = covariance_from(&DMatrix::from_iterator(3, 3, jtj.iter().cloned()), cost / dof);
    let values = [p[0], p[1], p[2]];
    Ok(FitResult {
        model: "exponential".into(),
        params: params_with_errors(&["offset", "D", "v"], &values, &cov),
        residual_rms: (cost / n as f64).sqrt(),
        covariance: cov,
        iterations,
        rms_history: history,
    })
}

/// Ordinary least-squares line `slope·t + intercept`.
pub fn fit_linear(series: &ContrastSeries) -> Result<FitResult> {
    let (t, y) = checked_data(series, 2)?;
    let n = t.len() as f64;
    let t_mean = t.iter().sum::<f64>() / n;
    let y_mean = y.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|ti| (ti - t_mean).powi(2)).sum();
    let sxy: f64 = t.iter().zip(&y).map(|(ti, yi)| (ti - t_mean) * (yi - y_mean)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("series", "times must not all coincide"));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;
    let ssr: f64 = t.iter().zip(&y).map(|(ti, yi)| (yi - slope * ti - intercept).powi(2)).sum();
    let sigma2 = if t.len() > 2 { ssr / (n - 2.0) } else { 0.0 };
    let sum_t2: f64 = t.iter().map(|ti| ti * ti).sum();
    let xtx = Matrix2::new(sum_t2, n * t_mean, n * t_mean, n);
    let cov = covariance_from(&DMatrix::from_iterator(2, 2, xtx.iter().cloned()), sigma2);
    let rms = (ssr / n).sqrt();
    Ok(FitResult {
        model: "linear".into(),
        params: params_with_errors(&["slope", "intercept"], &[slope, intercept], &cov),
        residual_rms: rms,
        covariance: cov,
        iterations: 1,
        rms_history: vec![rms],
    })
}

/// Magnitude of the exponential's slope at `t = t0`: `D·exp(−t0/v)/v`.
pub fn initial_decay_rate(fit: &FitResult, t0: f64) -> Option<f64> {
    let d = fit.param("D")?;
    let v = fit.param("v")?;
    Some((d * (-t0 / v).exp() / v).abs())
}

/// Least-squares solution of `X β = y` through the normal equations, for
/// cross-checking closed forms.
pub fn normal_equations(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let xt = x.transpose();
    (&xt * x).lu().solve(&(&xt * y))
}

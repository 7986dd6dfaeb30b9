//! Special functions and small numerical kernels.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Laguerre polynomial `L_n(x)` by the three-term recurrence
/// `(k+1) L_{k+1} = (2k+1−x) L_k − k L_{k−1}`.
pub fn laguerre(n: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Values `L_0(x) … L_{n_max}(x)` from one recurrence sweep.
pub fn laguerre_table(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    if n_max == 0 {
        return out;
    }
    out.push(1.0 - x);
    for k in 1..n_max {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

// B_{2k} / (2k (2k−1)) for k = 1..8
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
];

/// Principal branch of `ln Γ(z)` for `Re z > 0`, continuous in `z`.
///
/// Shifts `z` to `Re z ≥ 16` with `Γ(z+1) = zΓ(z)` and applies the Stirling
/// series there.
pub fn ln_gamma(z: Complex64) -> Complex64 {
    debug_assert!(z.re > 0.0, "ln_gamma implemented for Re z > 0");
    let mut shift = Complex64::new(0.0, 0.0);
    let mut w = z;
    while w.re < 16.0 {
        shift += w.ln();
        w += 1.0;
    }
    let inv = w.inv();
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    let mut pow = inv;
    for c in STIRLING {
        series += pow * c;
        pow *= inv2;
    }
    (w - 0.5) * w.ln() - w + 0.5 * (2.0 * PI).ln() + series - shift
}

// Gauss-Kronrod 7/15 nodes on [-1, 1] (non-negative half).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let dx = half * XGK[i];
        let sum = f(center - dx) + f(center + dx);
        kronrod += WGK[i] * sum;
        if i % 2 == 1 {
            gauss += WG[i / 2] * sum;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss-Kronrod quadrature of `f` over `[a, b]` to absolute
/// tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, whole: (f64, f64), depth: u32) -> f64 {
        let (value, err) = whole;
        if err <= tol || depth >= 48 {
            return value;
        }
        let mid = 0.5 * (a + b);
        let left = gauss_kronrod(f, a, mid);
        let right = gauss_kronrod(f, mid, b);
        recurse(f, a, mid, 0.5 * tol, left, depth + 1) + recurse(f, mid, b, 0.5 * tol, right, depth + 1)
    }
    let whole = gauss_kronrod(&f, a, b);
    recurse(&f, a, b, tol, whole, 0)
}

/// Golden-section minimization of a unimodal `f` on `[a, b]` down to an
/// interval no wider than `tol`. Returns the abscissa.
pub fn golden_minimize<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_form(n: usize, x: f64) -> f64 {
        match n {
            0 => 1.0,
            1 => 1.0 - x,
            2 => (x * x - 4.0 * x + 2.0) / 2.0,
            3 => (-x.powi(3) + 9.0 * x * x - 18.0 * x + 6.0) / 6.0,
            4 => (x.powi(4) - 16.0 * x.powi(3) + 72.0 * x * x - 96.0 * x + 24.0) / 24.0,
            5 => (-x.powi(5) + 25.0 * x.powi(4) - 200.0 * x.powi(3) + 600.0 * x * x - 600.0 * x + 120.0) / 120.0,
            _ => unreachable!(),
        }
    }

    #[test]
    fn laguerre_examples() {
        assert_eq!(laguerre(0, 3.7), 1.0);
        assert!((laguerre(1, 0.0625) - 0.9375).abs() < 1e-15);
        assert!((laguerre(2, 0.0625) - 0.876953125).abs() < 1e-15);
    }

    #[test]
    fn laguerre_matches_closed_forms() {
        for &x in &[0.0625, 4.84e-4, 1.0] {
            for n in 0..=5 {
                let exact = closed_form(n, x);
                assert!((laguerre(n, x) - exact).abs() <= 1e-12 * exact.abs().max(1e-300), "n={n} x={x}");
            }
        }
    }

    #[test]
    fn laguerre_table_agrees() {
        let tab = laguerre_table(300, 0.0625);
        for n in [0, 1, 7, 150, 300] {
            assert_eq!(tab[n], laguerre(n, 0.0625));
        }
    }

    #[test]
    fn laguerre_bounded_by_exponential() {
        // |L_n(x)| ≤ e^{x/2} for x ≥ 0
        for &x in &[4.84e-4f64, 0.0625, 0.5] {
            let bound = (0.5 * x).exp();
            for v in laguerre_table(4000, x) {
                assert!(v.abs() <= bound * (1.0 + 1e-12));
            }
        }
    }

    // ln Γ(1 + iy) imaginary part from the Weierstrass product:
    // −γy + Σ_n (y/n − atan(y/n)).
    fn arg_gamma_one_plus_iy(y: f64) -> f64 {
        let euler_gamma = 0.577_215_664_901_532_9;
        let mut sum = -euler_gamma * y;
        let n_terms = 2_000_000;
        for n in 1..=n_terms {
            let r = y / n as f64;
            sum += r - r.atan();
        }
        // tail Σ_{n>N} (y/n)^3/3 ≈ y³/(6N²)
        sum + y.powi(3) / (6.0 * (n_terms as f64).powi(2))
    }

    #[test]
    fn ln_gamma_real_values() {
        assert!(ln_gamma(Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!((ln_gamma(Complex64::new(5.0, 0.0)).re - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(Complex64::new(0.5, 0.0)).re - 0.5 * PI.ln()).abs() < 1e-13);
    }

    #[test]
    fn ln_gamma_phase_matches_product_series() {
        for &y in &[-0.318_135_922_330_097_1, 0.05, 0.7, -2.5] {
            let lg = ln_gamma(Complex64::new(1.0, y));
            assert!((lg.im - arg_gamma_one_plus_iy(y)).abs() < 1e-9, "y={y}");
        }
    }

    #[test]
    fn ln_gamma_modulus_identity() {
        // |Γ(1+iy)|² = πy / sinh(πy)
        for &y in &[0.2, 1.3, 3.0] {
            let lg = ln_gamma(Complex64::new(1.0, y));
            let expected = 0.5 * (PI * y / (PI * y).sinh()).ln();
            assert!((lg.re - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn quadrature_polynomial_and_oscillatory() {
        let v = integrate(|x| x * x * x - x, 0.0, 2.0, 1e-12);
        assert!((v - 2.0).abs() < 1e-12);
        let v = integrate(|x| (40.0 * x).cos(), 0.0, 1.0, 1e-10);
        assert!((v - (40f64).sin() / 40.0).abs() < 1e-10);
        assert_eq!(integrate(|x| x, 1.0, 1.0, 1e-9), 0.0);
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let x = golden_minimize(|x| (x - 1.234).powi(2), 0.0, 3.0, 1e-6);
        assert!((x - 1.234).abs() < 1e-6);
    }
}

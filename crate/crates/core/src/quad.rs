//! Quadrature rules: double-exponential (tanh-sinh) for endpoint singularities
//! and fixed-order Gauss–Legendre for smooth panels.

use std::sync::OnceLock;

/// Result of an adaptive rule: value and an error estimate.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

/// Tanh-sinh quadrature on `[a, b]`.
///
/// The integrand receives `(x, x - a, b - x)` with both distances computed
/// without cancellation, which keeps integrable endpoint singularities such
/// as `(x - a)^p`, `p > -1`, accurate.
pub fn tanh_sinh<F: Fn(f64, f64, f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> QuadResult {
    let d = 0.5 * (b - a);
    if d == 0.0 {
        return QuadResult { value: 0.0, error: 0.0 };
    }
    let half_pi = std::f64::consts::FRAC_PI_2;
    let t_max = 4.5;
    let node = |t: f64| -> f64 {
        let u = half_pi * t.sinh();
        let ch = u.abs().cosh();
        let w = half_pi * t.cosh() / (ch * ch);
        if !w.is_finite() || w == 0.0 {
            return 0.0;
        }
        // distance to the nearer endpoint, 1 - tanh|u| = 2 / (e^{2|u|} + 1)
        let near = d * 2.0 / ((2.0 * u.abs()).exp() + 1.0);
        if near <= 0.0 {
            return 0.0;
        }
        let (x, da, db) = if u < 0.0 {
            (a + near, near, 2.0 * d - near)
        } else {
            (b - near, 2.0 * d - near, near)
        };
        let y = f(x, da, db);
        if y.is_finite() {
            y * w
        } else {
            0.0
        }
    };
    let mut h = 1.0;
    let mut sum = node(0.0);
    let mut k = 1;
    while (k as f64) * h <= t_max {
        let t = k as f64 * h;
        sum += node(t) + node(-t);
        k += 1;
    }
    let mut est = d * h * sum;
    let mut err = f64::INFINITY;
    for _level in 0..10 {
        h *= 0.5;
        let mut add = 0.0;
        let mut k = 1;
        while (k as f64) * h <= t_max {
            let t = k as f64 * h;
            add += node(t) + node(-t);
            k += 2;
        }
        sum += add;
        let new = d * h * sum;
        err = (new - est).abs();
        est = new;
        if err <= rel_tol * est.abs() || err < 1e-300 {
            if _level >= 2 {
                break;
            }
        }
    }
    QuadResult { value: est, error: err }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static T: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    T.get_or_init(|| gauss_legendre(16))
}

fn gl6() -> &'static (Vec<f64>, Vec<f64>) {
    static T: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    T.get_or_init(|| gauss_legendre(6))
}

/// 16-point Gauss–Legendre on one panel.
pub fn gl16_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    panel(gl16(), f, a, b)
}

/// 6-point Gauss–Legendre on one panel.
pub fn gl6_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    panel(gl6(), f, a, b)
}

fn panel<F: Fn(f64) -> f64>(rule: &(Vec<f64>, Vec<f64>), f: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let d = 0.5 * (b - a);
    let (x, w) = rule;
    let mut s = 0.0;
    for i in 0..x.len() {
        s += w[i] * f(c + d * x[i]);
    }
    s * d
}

/// Composite 16-point Gauss–Legendre with `panels` equal panels.
pub fn gl16_composite<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| gl16_panel(f, a + i as f64 * h, a + (i + 1) as f64 * h))
        .sum()
}

/// Bisection for a sign change of `f` in `[a, b]`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a) <= tol {
            return m;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        // ∫_0^1 x^{-0.7} dx = 1/0.3
        let r = tanh_sinh(|_, da, _| da.powf(-0.7), 0.0, 1.0, 1e-13);
        assert!((r.value - 1.0 / 0.3).abs() < 1e-10, "{}", r.value);
        // ∫_0^1 (1-x)^{-0.5} dx = 2
        let r = tanh_sinh(|_, _, db| db.powf(-0.5), 0.0, 1.0, 1e-13);
        assert!((r.value - 2.0).abs() < 1e-11);
    }

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let v = gl16_panel(&|x: f64| x.powi(31) + x.powi(8), -1.0, 1.0);
        assert!((v - 2.0 / 9.0).abs() < 1e-14);
        let v = gl6_panel(&|x: f64| x.powi(11) + x * x, 0.0, 1.0);
        assert!((v - (1.0 / 12.0 + 1.0 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14);
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }
}

//! Moving-average kernels of the k-th order increments and their β-norms.

use crate::error::{Error, Result};
use crate::quad::{bisect, gl16_composite, gl16_panel, gl6_panel, tanh_sinh};

/// Exponents closer than this to the Lévy boundary `H = 1/β` are refused.
pub const BOUNDARY_EPS: f64 = 1e-6;

fn binom_int(k: usize, v: usize) -> f64 {
    let mut c = 1.0;
    for i in 0..v {
        c = c * (k - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Signed binomial weights `(-1)^v C(k, v)`, `v = 0..=k`.
pub fn difference_weights(k: usize) -> Vec<f64> {
    (0..=k)
        .map(|v| if v % 2 == 0 { binom_int(k, v) } else { -binom_int(k, v) })
        .collect()
}

/// Generalised binomial coefficient `C(a, m)`.
fn binom_real(a: f64, m: usize) -> f64 {
    let mut c = 1.0;
    for i in 0..m {
        c *= (a - i as f64) / (i + 1) as f64;
    }
    c
}

pub fn check_params(hurst: f64, beta: f64, k: usize) -> Result<f64> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::param(format!("Hurst index {hurst} outside (0, 1)")));
    }
    if !(beta > 0.0 && beta <= 2.0) {
        return Err(Error::param(format!("stability index {beta} outside (0, 2]")));
    }
    if k == 0 {
        return Err(Error::param("differencing order must be at least 1"));
    }
    let alpha = hurst - 1.0 / beta;
    if alpha.abs() < BOUNDARY_EPS {
        return Err(Error::BoundaryCase(format!(
            "H = {hurst} is within {BOUNDARY_EPS:e} of 1/β = {}; use the Lévy increment path",
            1.0 / beta
        )));
    }
    Ok(alpha)
}

/// Evaluation helper for `g(s) = Σ_v (-1)^v C(k,v) (v - s)_+^α` with a
/// cancellation-free expansion for large negative `s`.
#[derive(Debug, Clone)]
pub struct KernelG {
    pub alpha: f64,
    pub k: usize,
    weights: Vec<f64>,
    series: Vec<f64>,
}

impl KernelG {
    pub fn new(hurst: f64, beta: f64, k: usize) -> Result<Self> {
        let alpha = check_params(hurst, beta, k)?;
        Ok(Self::from_alpha(alpha, k))
    }

    pub fn from_alpha(alpha: f64, k: usize) -> Self {
        let weights = difference_weights(k);
        // coefficients C(α, m) Σ_v c_v v^m for m = k..k+60
        let series = (0..k + 61)
            .map(|m| {
                if m < k {
                    return 0.0;
                }
                let d: f64 = weights
                    .iter()
                    .enumerate()
                    .map(|(v, c)| c * (v as f64).powi(m as i32))
                    .sum();
                binom_real(alpha, m) * d
            })
            .collect();
        Self {
            alpha,
            k,
            weights,
            series,
        }
    }

    /// Direct evaluation.
    pub fn eval(&self, s: f64) -> f64 {
        if s < -4.0 * self.k as f64 {
            return self.eval_far(-s);
        }
        let mut out = 0.0;
        for (v, c) in self.weights.iter().enumerate() {
            let d = v as f64 - s;
            if d > 0.0 {
                out += c * d.powf(self.alpha);
            }
        }
        out
    }

    /// `g(s)` for `s` in `(j-1, j)` given `r = j - s > 0` exactly.
    pub fn eval_near_knot(&self, j: usize, r: f64) -> f64 {
        let mut out = 0.0;
        for v in j..=self.k {
            let d = (v - j) as f64 + r;
            out += self.weights[v] * d.powf(self.alpha);
        }
        out
    }

    /// `g(-y)` for `y > 4k` by the asymptotic series.
    pub fn eval_far(&self, y: f64) -> f64 {
        let inv = 1.0 / y;
        let mut p = inv.powi(self.k as i32);
        let mut acc = 0.0;
        for m in self.k..self.series.len() {
            let t = self.series[m] * p;
            acc += t;
            if t.abs() < 1e-17 * acc.abs() {
                break;
            }
            p *= inv;
        }
        y.powf(self.alpha) * acc
    }

    /// Leading coefficient of `g(-y) ~ lead · y^{α-k}`.
    pub fn lead(&self) -> f64 {
        self.series[self.k]
    }
}

/// `g_{H,β,k}(s)`.
pub fn kernel_g(s: f64, hurst: f64, beta: f64, k: usize) -> Result<f64> {
    Ok(KernelG::new(hurst, beta, k)?.eval(s))
}

const REL_TOL: f64 = 1e-12;

/// ∫ |g|^β over `(a, b) ⊂ (j-1, j)`, where `b` may equal the knot `j`.
fn piece_with_knot(g: &KernelG, beta: f64, j: usize, a: f64, b: f64) -> f64 {
    let jf = j as f64;
    // splitting at sign changes keeps the integrand smooth inside each piece
    let n_probe = 48;
    let mut cuts = vec![a];
    let val = |s: f64| {
        let r = jf - s;
        g.eval_near_knot(j, r)
    };
    let mut prev_s = a;
    let mut prev = val(a + 1e-9 * (b - a));
    for i in 1..n_probe {
        let s = a + (b - a) * i as f64 / n_probe as f64;
        let cur = val(s);
        if cur != 0.0 && prev != 0.0 && (cur > 0.0) != (prev > 0.0) {
            cuts.push(bisect(val, prev_s, s, 1e-15 * (1.0 + s.abs())));
        }
        prev_s = s;
        prev = cur;
    }
    cuts.push(b);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let knot_end = hi == b && b == jf;
        let r = tanh_sinh(
            |s, _da, db| {
                let r = if knot_end { db } else { jf - s };
                g.eval_near_knot(j, r).abs().powf(beta)
            },
            lo,
            hi,
            REL_TOL,
        );
        total += r.value;
    }
    total
}

fn far_tail(g: &KernelG, beta: f64, y0: f64) -> f64 {
    // y = e^t on [ln y0, ln y_max], analytic remainder beyond y_max
    let y_max = 1e12_f64.max(1e4 * y0);
    let (t0, t1) = (y0.ln(), y_max.ln());
    let f = |t: f64| {
        let y = t.exp();
        g.eval_far(y).abs().powf(beta) * y
    };
    let panels = ((t1 - t0) * 2.0).ceil() as usize;
    let body = gl16_composite(&f, t0, t1, panels.max(4));
    let p = beta * (g.alpha - g.k as f64) + 1.0;
    let rem = g.lead().abs().powf(beta) * y_max.powf(p) / (-p);
    body + rem
}

fn negative_half(g: &KernelG, beta: f64, lower: Option<f64>) -> f64 {
    let k = g.k as f64;
    let y0 = 4.0 * k;
    let mut total = piece_with_knot(g, beta, 0, -1.0, 0.0);
    let f = |s: f64| g.eval(s).abs().powf(beta);
    let stop = match lower {
        Some(t) => t.min(y0),
        None => y0,
    };
    // smooth unit panels on [-stop, -1], split where g changes sign
    let mut s_hi = -1.0;
    while s_hi > -stop {
        let s_lo = (s_hi - 1.0).max(-stop);
        let (glo, ghi) = (g.eval(s_lo), g.eval(s_hi));
        if glo != 0.0 && ghi != 0.0 && (glo > 0.0) != (ghi > 0.0) {
            let z = bisect(|s| g.eval(s), s_lo, s_hi, 1e-15);
            total += tanh_sinh(|s, _, _| f(s), s_lo, z, REL_TOL).value;
            total += tanh_sinh(|s, _, _| f(s), z, s_hi, REL_TOL).value;
        } else {
            total += gl16_panel(&f, s_lo, s_hi);
        }
        s_hi = s_lo;
    }
    match lower {
        None => total + far_tail(g, beta, y0),
        Some(t) if t <= y0 => total,
        Some(t) => {
            let ft = |u: f64| {
                let y = u.exp();
                g.eval_far(y).abs().powf(beta) * y
            };
            let (t0, t1) = (y0.ln(), t.ln());
            let panels = ((t1 - t0) * 4.0).ceil().max(2.0) as usize;
            total + gl16_composite(&ft, t0, t1, panels)
        }
    }
}

fn positive_part(g: &KernelG, beta: f64) -> f64 {
    (1..=g.k)
        .map(|j| piece_with_knot(g, beta, j, (j - 1) as f64, j as f64))
        .sum()
}

/// `∫_{-∞}^{k} |g_{H,β,k}(s)|^β ds`.
pub fn kernel_norm(hurst: f64, beta: f64, k: usize) -> Result<f64> {
    let g = KernelG::new(hurst, beta, k)?;
    Ok(positive_part(&g, beta) + negative_half(&g, beta, None))
}

/// `∫_{-truncation}^{k} |g_{H,β,k}(s)|^β ds`.
pub fn kernel_norm_truncated(hurst: f64, beta: f64, k: usize, truncation: f64) -> Result<f64> {
    if !(truncation >= 1.0) {
        return Err(Error::param("truncation must be at least 1"));
    }
    let g = KernelG::new(hurst, beta, k)?;
    Ok(positive_part(&g, beta) + negative_half(&g, beta, Some(truncation)))
}

/// Closed-form Gaussian normalisation: for β = 2,
/// `∫ g² = -(V_H / 2) Σ_{v,w} c_v c_w |v - w|^{2H}` with
/// `V_H = Γ(H+1/2)² / (Γ(2H+1) sin πH)`.
pub fn gaussian_kernel_norm(hurst: f64, k: usize) -> f64 {
    use statrs::function::gamma::gamma;
    let vh = gamma(hurst + 0.5).powi(2) / (gamma(2.0 * hurst + 1.0) * (std::f64::consts::PI * hurst).sin());
    let c = difference_weights(k);
    let mut s = 0.0;
    for (v, cv) in c.iter().enumerate() {
        for (w, cw) in c.iter().enumerate() {
            let d = (v as f64 - w as f64).abs();
            if d > 0.0 {
                s += cv * cw * d.powf(2.0 * hurst);
            }
        }
    }
    -0.5 * vh * s
}

/// Cell weights `ω_c = sign · (∫_{c h}^{(c+1) h} |κ(x)|^β dx)^{1/β}` of the
/// unit-lag increment kernel `κ(x) = x_+^α - (x-1)_+^α` on `cells` cells of
/// width `h = 1/mesh`.
pub fn increment_cell_weights(hurst: f64, beta: f64, mesh: usize, cells: usize) -> Result<Vec<f64>> {
    let alpha = check_params(hurst, beta, 1)?;
    let h = 1.0 / mesh as f64;
    let ab = alpha * beta;
    // κ(1 + d) = d^α expm1(α ln1p(1/d))
    let kappa_right = move |d: f64| d.powf(alpha) * (alpha * (1.0 / d).ln_1p()).exp_m1();
    let mut w = Vec::with_capacity(cells);
    for c in 0..cells {
        let (a, b) = (c as f64 * h, (c + 1) as f64 * h);
        let (val, sign) = if c < mesh {
            ((b.powf(ab + 1.0) - a.powf(ab + 1.0)) / (ab + 1.0), 1.0)
        } else {
            let (da, db) = (a - 1.0, b - 1.0);
            let f = |d: f64| kappa_right(d).abs().powf(beta);
            let v = if c < mesh + 4 {
                tanh_sinh(|_, dd, _| f(da + dd), da, db, 1e-13).value
            } else {
                gl6_panel(&f, da, db)
            };
            (v, if alpha > 0.0 { 1.0 } else { -1.0 })
        };
        w.push(sign * val.max(0.0).powf(1.0 / beta));
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_g_example() {
        let v = kernel_g(-1.0, 0.7, 2.0, 1).unwrap();
        assert!((v - (1.0 - 2f64.powf(0.2))).abs() < 1e-15);
        assert!((v + 0.148698).abs() < 1e-6);
    }

    #[test]
    fn boundary_refused() {
        assert!(matches!(kernel_g(0.0, 0.5, 2.0, 1), Err(Error::BoundaryCase(_))));
        assert!(matches!(kernel_norm(1.0 / 1.5, 1.5, 2), Err(Error::BoundaryCase(_))));
    }

    #[test]
    fn far_series_matches_direct() {
        for &(h, b, k) in &[(0.7, 1.5, 1usize), (0.3, 1.2, 2), (0.8, 2.0, 3)] {
            let g = KernelG::new(h, b, k).unwrap();
            for &y in &[4.5 * k as f64, 10.0, 50.0] {
                let mut direct = 0.0;
                for (v, c) in difference_weights(k).iter().enumerate() {
                    direct += c * (v as f64 + y).powf(g.alpha);
                }
                let far = g.eval_far(y);
                assert!((far - direct).abs() < 1e-12 * direct.abs().max(1e-3), "{far} {direct}");
            }
        }
    }

    #[test]
    fn gaussian_oracle() {
        for &h in &[0.3, 0.7, 0.85] {
            for k in 1..=3 {
                let num = kernel_norm(h, 2.0, k).unwrap();
                let ex = gaussian_kernel_norm(h, k);
                assert!((num - ex).abs() < 1e-9 * ex, "H {h} k {k}: {num} vs {ex}");
            }
        }
        assert!((gaussian_kernel_norm(0.3, 1) - 1.875070911).abs() < 1e-8);
        assert!((gaussian_kernel_norm(0.7, 1) - 0.838892972).abs() < 1e-8);
    }

    #[test]
    fn truncated_converges_to_full() {
        let full = kernel_norm(0.6, 1.4, 2).unwrap();
        let t = kernel_norm_truncated(0.6, 1.4, 2, 1e5).unwrap();
        assert!(t < full && (full - t) / full < 1e-6);
    }

    #[test]
    fn cell_weights_sum_to_truncated_norm() {
        for &(h, b) in &[(0.7, 2.0), (0.3, 1.5), (0.4, 1.8), (0.9, 1.2)] {
            let mesh = 8;
            let t = 50;
            let w = increment_cell_weights(h, b, mesh, mesh * t).unwrap();
            let s: f64 = w.iter().map(|x| x.abs().powf(b)).sum();
            let ex = kernel_norm_truncated(h, b, 1, t as f64 - 1.0).unwrap();
            assert!((s - ex).abs() < 1e-8 * ex, "H {h} β {b}: {s} vs {ex}");
        }
    }
}

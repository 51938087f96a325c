//! Starting values: log-variogram slope for `H_1`, empirical characteristic
//! function for the dominant scale and stability index.

use super::design::MomentDesign;
use super::params::{Method, ParamVector, H_MAX, H_MIN};
use crate::error::{Error, Result};
use crate::lfsm::IncrementPanel;
use crate::stats::{mean, median};

fn mean_log_abs(col: &[f64]) -> Result<f64> {
    let v: Vec<f64> = col.iter().filter(|x| **x != 0.0).map(|x| x.abs().ln()).collect();
    if v.len() < 2 {
        return Err(Error::Degenerate("increments are identically zero".into()));
    }
    Ok(mean(&v))
}

/// `H_1` from the slope of `E log|X_{γ}|` between the two smallest lags.
pub fn variogram_hurst(panel: &IncrementPanel) -> Result<f64> {
    let mut g = panel.gammas.clone();
    g.sort_unstable();
    if g.len() < 2 {
        return Err(Error::input("the initializer needs at least two lags"));
    }
    let a = mean_log_abs(panel.column_for(g[0]).unwrap())?;
    let b = mean_log_abs(panel.column_for(g[1]).unwrap())?;
    let h = (b - a) / (g[1] as f64 / g[0] as f64).ln();
    Ok(h.clamp(H_MIN + 0.01, H_MAX - 0.05))
}

fn ecf(z: &[f64], t: f64) -> f64 {
    mean(&z.iter().map(|x| (t * x).cos()).collect::<Vec<_>>())
}

/// `(b̃, β)` of the rescaled lag-one increments `Δ^{-H} X` from the empirical
/// characteristic function at `t` and `2t`.
pub fn ecf_scale_beta(panel: &IncrementPanel, hurst: f64, gamma: usize) -> Result<(f64, f64)> {
    let col = panel
        .column_for(gamma)
        .ok_or_else(|| Error::input(format!("panel lacks lag {gamma}")))?;
    let u = panel.delta.powf(-hurst) * (gamma as f64).powf(-hurst);
    let z: Vec<f64> = col.iter().map(|x| u * x).collect();
    let m = median(&z.iter().map(|x| x.abs()).collect::<Vec<_>>());
    if !(m > 0.0) {
        return Err(Error::Degenerate("median absolute increment is zero".into()));
    }
    let t = 0.5 / m;
    let (p1, p2) = (ecf(&z, t), ecf(&z, 2.0 * t));
    let beta = if p1 > 0.0 && p1 < 1.0 && p2 > 0.0 && p2 < p1 {
        (p2.ln() / p1.ln()).log2().clamp(0.3, 2.0)
    } else {
        1.5
    };
    let scale = if p1 > 0.0 && p1 < 1.0 { -p1.ln() / t.powf(beta) } else { 1.0 };
    Ok((scale, beta))
}

/// Starting value for a design with `q` components (adaptive) or the
/// two-Gaussian, two-stable layout (threshold).
pub fn initial_guess(panel: &IncrementPanel, design: &MomentDesign, q: usize) -> Result<ParamVector> {
    let h1 = variogram_hurst(panel)?;
    let g0 = *panel.gammas.iter().min().unwrap();
    let mut theta = match design.method {
        Method::Adaptive => {
            if q == 0 {
                return Err(Error::param("q must be at least 1"));
            }
            let (b, beta) = ecf_scale_beta(panel, h1, g0)?;
            let step = ((H_MAX - 0.02 - h1) / q as f64).min(0.15);
            let mut c = Vec::with_capacity(3 * q);
            for j in 0..q {
                let (bj, betaj) = if j == 0 { (b, beta) } else { (0.5 * b, beta) };
                c.extend([bj, h1 + j as f64 * step, betaj]);
            }
            ParamVector::raw(Method::Adaptive, c)
        }
        Method::Threshold => {
            let col = panel.column_for(g0).unwrap();
            let u = panel.delta.powf(-h1) * (g0 as f64).powf(-h1);
            let z: Vec<f64> = col.iter().map(|x| u * x).collect();
            let m = median(&z.iter().map(|x| x.abs()).collect::<Vec<_>>());
            let t = 0.3 / m.max(1e-300);
            let p = ecf(&z, t);
            let a1 = if p > 0.0 && p < 1.0 { -p.ln() / (t * t) } else { 1.0 };
            let room = (H_MAX - 0.02 - h1).max(0.04);
            ParamVector::raw(
                Method::Threshold,
                vec![
                    a1,
                    h1,
                    0.5 * a1,
                    h1 + 0.25 * room,
                    0.2 * a1,
                    h1 + 0.5 * room,
                    1.0,
                    0.2 * a1,
                    h1 + 0.75 * room,
                    1.5,
                ],
            )
        }
    };
    theta.project();
    theta.validate()?;
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::design::default_f1;
    use crate::lfsm::{k_order_increments, simulate_mixed_path, ModelParams, SamplingScheme};
    use crate::stable::RngHandle;

    #[test]
    fn initializer_near_truth() {
        let m = ModelParams::single(1.0, 0.7, 1.5).unwrap();
        let n = 20000;
        let s = SamplingScheme::new(n, 1.0 / n as f64, 2, vec![1, 2]).unwrap();
        let p = simulate_mixed_path(&m, &s, &RngHandle::new(7, 0)).unwrap();
        let panel = k_order_increments(&p, 2, &[1, 2]).unwrap();
        let d = MomentDesign::default_adaptive(1, default_f1());
        let th = initial_guess(&panel, &d, 1).unwrap();
        assert!((th.coords[1] - 0.7).abs() < 0.05, "{:?}", th.coords);
        assert!((th.coords[2] - 1.5).abs() < 0.25, "{:?}", th.coords);
    }
}

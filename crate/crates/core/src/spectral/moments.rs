//! Model expectations `E f(λ u X_{l,n,γ})` through Fourier inversion of the
//! characteristic exponent `ψ_n`.

use serde::{Deserialize, Serialize};

use super::fourier::FourierTable;
use crate::error::{Error, Result};

/// Spectral description of one component: `scale` is `b̃_j` (or `ã_j` for a
/// Gaussian component, which then has `beta = 2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralComponent {
    pub scale: f64,
    pub hurst: f64,
    pub beta: f64,
}

impl SpectralComponent {
    pub fn new(scale: f64, hurst: f64, beta: f64) -> Self {
        Self { scale, hurst, beta }
    }
}

/// Largest stability index accepted by the formal extension of `ψ_n`.
pub const BETA_MAX: f64 = 4.0;

fn check(comps: &[SpectralComponent]) -> Result<()> {
    for c in comps {
        if !(c.scale >= 0.0 && c.scale.is_finite()) {
            return Err(Error::param(format!("spectral scale {} must be non-negative", c.scale)));
        }
        if !(c.beta > 0.0 && c.beta <= BETA_MAX) {
            return Err(Error::param(format!(
                "stability index {} outside the extended domain (0, {BETA_MAX}]",
                c.beta
            )));
        }
    }
    Ok(())
}

/// `ψ_n(x, γ) = Σ_j c_j |x|^{β_j} γ^{β_j H_j} Δ^{β_j H_j}`.
pub fn psi_n(x: f64, gamma: f64, delta: f64, comps: &[SpectralComponent]) -> f64 {
    comps
        .iter()
        .map(|c| c.scale * x.abs().powf(c.beta) * (gamma * delta).powf(c.beta * c.hurst))
        .sum()
}

/// How the rescaling `u_n` enters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Rescale {
    /// Fixed numeric factor, no dependence on θ.
    Fixed(f64),
    /// `u = w Δ^{-H}` with `H` the Hurst index of component `dominant`.
    Adaptive { w: f64, dominant: usize },
}

/// Log coefficients `ln C_j` with `ψ(v) = Σ_j exp(ln C_j + β_j ln|v|)`.
fn log_coeffs(comps: &[SpectralComponent], lambda: f64, gamma: f64, delta: f64, ln_u: f64) -> Vec<f64> {
    comps
        .iter()
        .map(|c| {
            c.scale.ln() + c.beta * (lambda.abs().ln() + ln_u + c.hurst * gamma.ln() + c.hurst * delta.ln())
        })
        .collect()
}

fn ln_u(rescale: Rescale, comps: &[SpectralComponent], delta: f64) -> Result<f64> {
    match rescale {
        Rescale::Fixed(u) => {
            if !(u > 0.0) {
                return Err(Error::param("rescaling factor must be positive"));
            }
            Ok(u.ln())
        }
        Rescale::Adaptive { w, dominant } => {
            let c = comps
                .get(dominant)
                .ok_or_else(|| Error::param("dominant component index out of range"))?;
            Ok(w.ln() - c.hurst * delta.ln())
        }
    }
}

/// `∫ f̂(v) exp(-ψ_n(λ u v, γ)) dv`.
pub fn model_expectation(
    table: &FourierTable,
    comps: &[SpectralComponent],
    lambda: f64,
    gamma: f64,
    delta: f64,
    rescale: Rescale,
) -> Result<f64> {
    check(comps)?;
    let lu = ln_u(rescale, comps, delta)?;
    let lc = log_coeffs(comps, lambda, gamma, delta, lu);
    let mut s = table.wts[0];
    for i in 1..table.wts.len() {
        let lv = table.ln_v[i];
        let mut psi = 0.0;
        for (j, c) in comps.iter().enumerate() {
            psi += (lc[j] + c.beta * lv).exp();
        }
        if psi > 745.0 {
            break;
        }
        s += table.wts[i] * (-psi).exp();
    }
    Ok(s)
}

/// Value, gradient and scale derivative of a model expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationGrad {
    pub value: f64,
    /// `∂/∂(scale_j, H_j, β_j)` for each component, including the chain
    /// rule through an adaptive `u`.
    pub grad: Vec<[f64; 3]>,
    /// `E φ(λ u X)` with `φ(x) = x f'(x)`.
    pub phi: f64,
}

pub fn model_expectation_grad(
    table: &FourierTable,
    comps: &[SpectralComponent],
    lambda: f64,
    gamma: f64,
    delta: f64,
    rescale: Rescale,
) -> Result<ExpectationGrad> {
    check(comps)?;
    let q = comps.len();
    let lu = ln_u(rescale, comps, delta)?;
    let lc = log_coeffs(comps, lambda, gamma, delta, lu);
    // ∂ψ_j/∂β_j = ψ_j (ln|λ u v| + H_j ln γ + H_j ln Δ) = ψ_j (L_j + ln v)
    let lbase: Vec<f64> = comps
        .iter()
        .map(|c| lambda.abs().ln() + lu + c.hurst * gamma.ln() + c.hurst * delta.ln())
        .collect();
    let mut value = table.wts[0];
    // accumulators of ∫ f̂ e^{-ψ} ψ_j and ∫ f̂ e^{-ψ} ψ_j ln v
    let mut a = vec![0.0; q];
    let mut b = vec![0.0; q];
    let mut psij = vec![0.0; q];
    for i in 1..table.wts.len() {
        let lv = table.ln_v[i];
        let mut psi = 0.0;
        for j in 0..q {
            psij[j] = (lc[j] + comps[j].beta * lv).exp();
            psi += psij[j];
        }
        if psi > 745.0 {
            break;
        }
        let we = table.wts[i] * (-psi).exp();
        value += we;
        for j in 0..q {
            a[j] += we * psij[j];
            b[j] += we * psij[j] * lv;
        }
    }
    let mut grad = vec![[0.0; 3]; q];
    let ln_gd = gamma.ln() + delta.ln();
    for j in 0..q {
        let c = &comps[j];
        grad[j][0] = if c.scale > 0.0 { -a[j] / c.scale } else { 0.0 };
        grad[j][1] = -a[j] * c.beta * ln_gd;
        grad[j][2] = -(a[j] * lbase[j] + b[j]);
    }
    if let Rescale::Adaptive { dominant, .. } = rescale {
        // ln u = ln w - H_dom ln Δ
        let extra: f64 = (0..q).map(|j| a[j] * comps[j].beta).sum::<f64>() * delta.ln();
        grad[dominant][1] += extra;
    }
    let phi = -(0..q).map(|j| a[j] * comps[j].beta).sum::<f64>();
    Ok(ExpectationGrad { value, grad, phi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::testfn::TestFunction;
    use statrs::function::erf::erfc;
    use std::sync::Arc;

    fn f1() -> Arc<FourierTable> {
        FourierTable::cached(&TestFunction::GaussBump { decay: 1.0 }).unwrap()
    }

    #[test]
    fn gaussian_closed_form() {
        let t = f1();
        for &c in &[0.1, 0.5, 1.0, 3.0] {
            let comps = [SpectralComponent::new(c, 0.5, 2.0)];
            let e = model_expectation(&t, &comps, 1.0, 1.0, 1.0, Rescale::Fixed(1.0)).unwrap();
            // X ~ N(0, 2c): E exp(-X²/2) = (1 + 2c)^{-1/2}
            assert!((e - 1.0 / (1.0 + 2.0 * c).sqrt()).abs() < 1e-9, "{c}: {e}");
        }
    }

    #[test]
    fn cauchy_closed_form() {
        let t = f1();
        for &c in &[0.2, 1.0, 4.0] {
            let comps = [SpectralComponent::new(c, 0.5, 1.0)];
            let e = model_expectation(&t, &comps, 1.0, 1.0, 1.0, Rescale::Fixed(1.0)).unwrap();
            let ex = (c * c / 2.0).exp() * erfc(c / 2f64.sqrt());
            assert!((e - ex).abs() < 1e-6, "{c}: {e} vs {ex}");
        }
    }

    #[test]
    fn degenerate_scale_gives_f0() {
        let t = f1();
        let comps = [SpectralComponent::new(1.0, 0.5, 1.5)];
        let e = model_expectation(&t, &comps, 1.0, 1.0, 1.0, Rescale::Fixed(1e-30)).unwrap();
        assert!((e - 1.0).abs() < 1e-9);
    }

    #[test]
    fn psi_single_component() {
        let c = [SpectralComponent::new(2.0, 0.5, 1.5)];
        let v = psi_n(2.0, 4.0, 0.25, &c);
        assert!((v - 2.0 * 2f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let t = f1();
        let comps = vec![SpectralComponent::new(0.8, 0.35, 1.6), SpectralComponent::new(0.5, 0.6, 1.2)];
        let delta = 1e-2;
        let rs = Rescale::Adaptive { w: 1.0, dominant: 0 };
        let g = model_expectation_grad(&t, &comps, 2.0, 2.0, delta, rs).unwrap();
        for j in 0..2 {
            for p in 0..3 {
                let h = 1e-6;
                let mut up = comps.clone();
                let mut dn = comps.clone();
                match p {
                    0 => {
                        up[j].scale += h;
                        dn[j].scale -= h
                    }
                    1 => {
                        up[j].hurst += h;
                        dn[j].hurst -= h
                    }
                    _ => {
                        up[j].beta += h;
                        dn[j].beta -= h
                    }
                }
                let fd = (model_expectation(&t, &up, 2.0, 2.0, delta, rs).unwrap()
                    - model_expectation(&t, &dn, 2.0, 2.0, delta, rs).unwrap())
                    / (2.0 * h);
                assert!((fd - g.grad[j][p]).abs() < 1e-6 * (1.0 + fd.abs()), "{j} {p}: {fd} {}", g.grad[j][p]);
            }
        }
        // E φ(cX) = c d/dc E f(cX)
        let h = 1e-6;
        let e = |u: f64| model_expectation(&t, &comps, 2.0, 2.0, delta, Rescale::Fixed(u)).unwrap();
        let u0 = delta.powf(-0.35);
        let fd = (e(u0 * (1.0 + h)) - e(u0 * (1.0 - h))) / (2.0 * h);
        assert!((fd - g.phi).abs() < 1e-6);
    }
}

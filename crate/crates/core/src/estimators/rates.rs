//! Rate matrices, the `w_n` schedule and the solver standardizations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::params::{Method, ParamVector};
use crate::error::{Error, Result};

fn check_delta(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!("sampling step Δ = {delta} must lie in (0, 1)")));
    }
    Ok(delta.ln().abs())
}

/// `η / (9σ) / √|log Δ|`.
pub fn wn_upper_bound(delta: f64, eta: f64, sigma: f64) -> Result<f64> {
    let l = check_delta(delta)?;
    if !(eta > 0.0 && sigma > 0.0) {
        return Err(Error::param("eta and sigma must be positive"));
    }
    Ok(eta / (9.0 * sigma) / l.sqrt())
}

/// `w_n = min(c0, η/(9σ)) / √|log Δ|`.
pub fn wn_schedule(delta: f64, eta: f64, sigma: f64, c0: f64) -> Result<f64> {
    let l = check_delta(delta)?;
    if !(eta > 0.0 && sigma > 0.0 && c0 > 0.0) {
        return Err(Error::param("eta, sigma and c0 must be positive"));
    }
    Ok(c0.min(eta / (9.0 * sigma)) / l.sqrt())
}

fn check_n(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("n must be positive"));
    }
    Ok((n as f64).sqrt())
}

fn set_block(m: &mut DMatrix<f64>, at: usize, block: &[&[f64]], factor: f64) {
    for (i, row) in block.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            m[(at + i, at + j)] = factor * v;
        }
    }
}

fn require(theta: &ParamVector, method: Method) -> Result<()> {
    if theta.method != method {
        return Err(Error::param(format!("expected a {method:?} parameter vector")));
    }
    Ok(())
}

/// Block-diagonal rate matrix of the adaptive estimator, as displayed.
pub fn rate_matrix_cbar(theta: &ParamVector, n: usize, delta: f64) -> Result<DMatrix<f64>> {
    require(theta, Method::Adaptive)?;
    let sn = check_n(n)?;
    let ld = delta.ln();
    let comps = theta.components();
    let h1 = comps[0].hurst;
    let mut m = DMatrix::zeros(theta.dim(), theta.dim());
    for (j, c) in comps.iter().enumerate() {
        let ind = if j == 0 { 0.0 } else { 1.0 };
        let f = delta.powf(c.beta * (h1 - c.hurst)) / sn;
        let b = [
            &[1.0, -c.scale * c.beta * ld * ind, c.scale * c.hurst * ld * ind][..],
            &[0.0, 1.0, -c.hurst / c.beta][..],
            &[0.0, 0.0, 1.0][..],
        ];
        set_block(&mut m, 3 * j, &b, f);
    }
    Ok(m)
}

/// Standardization `C_n` of the adaptive estimating equation: the rate
/// matrix without `1/√n`, with the `(1,3)` entry `b̃_j H_1 log Δ`
/// under which `D E · C_n` has a finite limit.
pub fn adaptive_scaling(theta: &ParamVector, delta: f64) -> Result<DMatrix<f64>> {
    require(theta, Method::Adaptive)?;
    let ld = delta.ln();
    let comps = theta.components();
    let h1 = comps[0].hurst;
    let mut m = DMatrix::zeros(theta.dim(), theta.dim());
    for (j, c) in comps.iter().enumerate() {
        let ind = if j == 0 { 0.0 } else { 1.0 };
        let f = delta.powf(c.beta * (h1 - c.hurst));
        let b = [
            &[1.0, -c.scale * c.beta * ld * ind, c.scale * h1 * ld * ind][..],
            &[0.0, 1.0, -c.hurst / c.beta][..],
            &[0.0, 0.0, 1.0][..],
        ];
        set_block(&mut m, 3 * j, &b, f);
    }
    Ok(m)
}

/// `d_n = max_j w^{β_j/2} Δ^{β_j (H̄_j − H_1)/2}`.
pub fn threshold_dn(theta: &ParamVector, delta: f64, w: f64) -> Result<f64> {
    require(theta, Method::Threshold)?;
    let c = theta.components();
    let h1 = c[0].hurst;
    Ok(c[2..]
        .iter()
        .map(|s| w.powf(s.beta / 2.0) * delta.powf(s.beta * (s.hurst - h1) / 2.0))
        .fold(0.0, f64::max))
}

/// Block-diagonal rate matrix of the threshold estimator, as displayed.
pub fn rate_matrix_r(theta: &ParamVector, n: usize, delta: f64, w: f64) -> Result<DMatrix<f64>> {
    require(theta, Method::Threshold)?;
    let sn = check_n(n)?;
    let ld = delta.ln();
    let c = theta.components();
    let h1 = c[0].hurst;
    let mut m = DMatrix::zeros(10, 10);
    for j in 0..2 {
        let ind = if j == 0 { 0.0 } else { 1.0 };
        let f = delta.powf(2.0 * (h1 - c[j].hurst)) / sn;
        let b = [&[1.0, -2.0 * c[j].scale * ld * ind][..], &[0.0, 1.0][..]];
        set_block(&mut m, 2 * j, &b, f);
    }
    let b1 = c[2].beta;
    let hb1 = c[2].hurst;
    for j in 0..2 {
        let s = &c[2 + j];
        let f = w.powf(b1 / 2.0 - s.beta) * delta.powf(b1 * (hb1 - h1) / 2.0 - s.beta * (s.hurst - h1)) / sn;
        let b = [
            &[1.0, 0.0, -s.scale * w.abs().ln()][..],
            &[0.0, 1.0, -s.hurst / s.beta][..],
            &[0.0, 0.0, 1.0][..],
        ];
        set_block(&mut m, 4 + 3 * j, &b, f);
    }
    Ok(m)
}

/// Row and column standardizations `(B_n, C_n)` of the threshold equation.
/// The stable blocks carry `(1,2) = −b̃_j β_j log Δ` and
/// `(1,3) = −b̃_j log u_n`, under which `B_n D E C_n` has a finite limit.
pub fn threshold_scaling(theta: &ParamVector, delta: f64, w: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let dn = threshold_dn(theta, delta, w)?;
    let ld = delta.ln();
    let c = theta.components();
    let h1 = c[0].hurst;
    let ln_u = w.ln() - h1 * ld;
    let mut m = DMatrix::zeros(10, 10);
    for j in 0..2 {
        let ind = if j == 0 { 0.0 } else { 1.0 };
        let f = w.powi(-2) * delta.powf(2.0 * (h1 - c[j].hurst));
        let b = [&[1.0, -2.0 * c[j].scale * ld * ind][..], &[0.0, 1.0][..]];
        set_block(&mut m, 2 * j, &b, f);
    }
    for j in 0..2 {
        let s = &c[2 + j];
        let f = w.powf(-s.beta) * delta.powf(s.beta * (h1 - s.hurst)) * dn;
        let b = [
            &[1.0, -s.scale * s.beta * ld, -s.scale * ln_u][..],
            &[0.0, 1.0, -s.hurst / s.beta][..],
            &[0.0, 0.0, 1.0][..],
        ];
        set_block(&mut m, 4 + 3 * j, &b, f);
    }
    let mut bvec = DVector::from_element(10, 1.0);
    for i in 4..10 {
        bvec[i] = 1.0 / dn;
    }
    Ok((bvec, m))
}

/// A rate `n^power (log n)^log_power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub power: f64,
    pub log_power: f64,
}

impl Rate {
    pub fn new(power: f64, log_power: f64) -> Self {
        Self { power, log_power }
    }

    pub fn eval(&self, n: f64) -> f64 {
        n.powf(self.power) * n.ln().powf(self.log_power)
    }

    /// Product of two rates.
    pub fn times(&self, other: Rate) -> Rate {
        Rate::new(self.power + other.power, self.log_power + other.log_power)
    }

    /// `self ≪ other` as `n → ∞`.
    pub fn is_o(&self, other: &Rate) -> bool {
        self.power < other.power - 1e-12
            || ((self.power - other.power).abs() <= 1e-12 && self.log_power < other.log_power - 1e-12)
    }

    /// `self → ∞` as `n → ∞`.
    pub fn diverges(&self) -> bool {
        Rate::new(0.0, 0.0).is_o(self)
    }

    pub fn vanishes(&self) -> bool {
        self.is_o(&Rate::new(0.0, 0.0))
    }

    pub fn describe(&self) -> String {
        let mut s = format!("n^{:.4}", self.power);
        if self.log_power != 0.0 {
            s.push_str(&format!(" (log n)^{:.4}", self.log_power));
        }
        s
    }
}

/// Convergence rate of each coordinate under `Δ_n = n^{-ρ}`.
pub fn predicted_rates(theta: &ParamVector, rho: f64) -> Vec<Rate> {
    let c = theta.components();
    let h1 = c[0].hurst;
    match theta.method {
        Method::Adaptive => c
            .iter()
            .flat_map(|s| {
                let r = Rate::new(rho * s.beta * (s.hurst - h1) - 0.5, 0.0);
                [r, r, r]
            })
            .collect(),
        Method::Threshold => {
            let g2 = Rate::new(2.0 * rho * (c[1].hurst - h1) - 0.5, 0.0);
            let (b1, hb1) = (c[2].beta, c[2].hurst);
            let s1 = Rate::new(rho * b1 * (hb1 - h1) / 2.0 - 0.5, b1 / 4.0);
            let s2 = Rate::new(
                rho * (c[3].beta * (c[3].hurst - h1) - b1 * (hb1 - h1) / 2.0) - 0.5,
                c[3].beta / 2.0 - b1 / 4.0,
            );
            let g1 = Rate::new(-0.5, 0.0);
            vec![g1, g1, g2, g2, s1, s1, s1, s2, s2, s2]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wn_examples() {
        let e = std::f64::consts::E;
        assert!((wn_schedule(1.0 / e, 9.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((wn_schedule(e.powi(-4), 9.0, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for i in 1..40 {
            let w = wn_schedule(2f64.powi(-i), 1.0, 0.3, 0.5).unwrap();
            assert!(w <= prev);
            prev = w;
        }
        assert!(wn_schedule(1.0, 1.0, 1.0, 1.0).is_err());
        assert!(wn_schedule(2.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn cbar_first_block() {
        let th = ParamVector::adaptive(vec![1.3, 0.7, 1.5]).unwrap();
        let m = rate_matrix_cbar(&th, 100, 0.01).unwrap();
        assert!((m[(0, 0)] - 0.1).abs() < 1e-15);
        assert_eq!(m[(0, 1)], 0.0);
        assert_eq!(m[(0, 2)], 0.0);
        assert!((m[(1, 2)] + 0.1 * 0.7 / 1.5).abs() < 1e-15);
        let m4 = rate_matrix_cbar(&th, 400, 0.01).unwrap();
        assert!((m.norm() / m4.norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cbar_second_block_by_hand() {
        let th = ParamVector::adaptive(vec![1.0, 0.4, 1.8, 0.5, 0.6, 1.2]).unwrap();
        let (n, d) = (1000usize, 1e-3f64);
        let m = rate_matrix_cbar(&th, n, d).unwrap();
        let f = (1e-3f64).powf(1.2 * (0.4 - 0.6)) / 1000f64.sqrt();
        let l = (1e-3f64).ln();
        assert!((m[(3, 3)] - f).abs() < 1e-12 * f);
        assert!((m[(3, 4)] - f * (-0.5 * 1.2 * l)).abs() < 1e-12 * f);
        assert!((m[(3, 5)] - f * 0.5 * 0.6 * l).abs() < 1e-12 * f);
        assert!((m[(4, 5)] + f * 0.5).abs() < 1e-12 * f);
        assert_eq!(m[(0, 3)], 0.0);
    }

    #[test]
    fn r_matrix_structure() {
        let th = ParamVector::threshold(vec![1.0, 0.3, 0.5, 0.5, 0.5, 0.6, 1.2, 0.5, 0.8, 1.5]).unwrap();
        let (n, d) = (1000usize, 1e-3f64);
        let m = rate_matrix_r(&th, n, d, 1.0).unwrap();
        assert_eq!(m[(0, 1)], 0.0);
        let f2 = d.powf(2.0 * (0.3 - 0.5)) / (n as f64).sqrt();
        assert!((m[(2, 3)] - f2 * (-2.0 * 0.5 * d.ln())).abs() < 1e-12 * f2);
        // w = 1: pure Δ-power prefactor and no log|w| entry
        let f = d.powf(1.2 * 0.3 / 2.0 - 1.5 * 0.5) / (n as f64).sqrt();
        assert!((m[(7, 7)] - f).abs() < 1e-12 * f);
        assert_eq!(m[(7, 9)], 0.0);
        assert!((m[(8, 9)] + f * 0.8 / 1.5).abs() < 1e-12 * f);
    }

    #[test]
    fn rate_ordering() {
        let a = Rate::new(-0.5, 0.0);
        let b = Rate::new(-0.5, 1.0);
        assert!(a.is_o(&b));
        assert!(!b.is_o(&a));
        assert!(a.vanishes());
        assert!(Rate::new(0.0, 0.5).diverges());
    }

    #[test]
    fn table_two_rates() {
        let th = ParamVector::threshold(vec![1.0, 0.3, 0.5, 0.5, 0.5, 0.6, 1.2, 0.5, 0.8, 1.5]).unwrap();
        let r = predicted_rates(&th, 1.0);
        assert!((r[2].power - (2.0 * 0.2 - 0.5)).abs() < 1e-15);
        assert!((r[5].power - (0.6 * 0.3 - 0.5)).abs() < 1e-15);
        assert!((r[5].log_power - 0.3).abs() < 1e-15);
        assert!((r[8].log_power - (0.75 - 0.3)).abs() < 1e-15);
    }
}

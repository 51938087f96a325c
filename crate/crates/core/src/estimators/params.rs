//! Parameter vectors of the two estimating equations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lfsm::kernel::{difference_weights, kernel_norm};
use crate::lfsm::ModelParams;
use crate::spectral::moments::{SpectralComponent, BETA_MAX};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Adaptive,
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Scale,
    Hurst,
    Beta,
}

pub const H_MIN: f64 = 0.01;
pub const H_MAX: f64 = 0.99;
pub const BETA_MIN: f64 = 0.1;
pub const SCALE_MIN: f64 = 1e-12;
const TIE: f64 = 1e-4;

/// Coordinates `(b̃_1, H_1, β_1, …, b̃_q, H_q, β_q)` for the adaptive method
/// or `(ã_1, H_1, ã_2, H_2, b̃_1, H̄_1, β_1, b̃_2, H̄_2, β_2)` for the
/// threshold method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub method: Method,
    pub coords: Vec<f64>,
}

impl ParamVector {
    pub fn adaptive(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.len() % 3 != 0 {
            return Err(Error::param("adaptive parameter vector needs 3q coordinates"));
        }
        let p = Self {
            method: Method::Adaptive,
            coords,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn threshold(coords: Vec<f64>) -> Result<Self> {
        if coords.len() != 10 {
            return Err(Error::param("threshold parameter vector needs 10 coordinates"));
        }
        let p = Self {
            method: Method::Threshold,
            coords,
        };
        p.validate()?;
        Ok(p)
    }

    /// Unchecked constructor for iterates and tests.
    pub fn raw(method: Method, coords: Vec<f64>) -> Self {
        Self { method, coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn n_components(&self) -> usize {
        match self.method {
            Method::Adaptive => self.coords.len() / 3,
            Method::Threshold => 4,
        }
    }

    /// Component and kind of each coordinate.
    pub fn layout(&self) -> Vec<(usize, Kind)> {
        match self.method {
            Method::Adaptive => (0..self.coords.len())
                .map(|i| {
                    let k = match i % 3 {
                        0 => Kind::Scale,
                        1 => Kind::Hurst,
                        _ => Kind::Beta,
                    };
                    (i / 3, k)
                })
                .collect(),
            Method::Threshold => vec![
                (0, Kind::Scale),
                (0, Kind::Hurst),
                (1, Kind::Scale),
                (1, Kind::Hurst),
                (2, Kind::Scale),
                (2, Kind::Hurst),
                (2, Kind::Beta),
                (3, Kind::Scale),
                (3, Kind::Hurst),
                (3, Kind::Beta),
            ],
        }
    }

    /// Coordinate names for reports.
    pub fn names(&self) -> Vec<String> {
        match self.method {
            Method::Adaptive => self
                .layout()
                .iter()
                .map(|(j, k)| match k {
                    Kind::Scale => format!("b{}", j + 1),
                    Kind::Hurst => format!("H{}", j + 1),
                    Kind::Beta => format!("beta{}", j + 1),
                })
                .collect(),
            Method::Threshold => ["a1", "H1", "a2", "H2", "b1", "Hbar1", "beta1", "b2", "Hbar2", "beta2"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }

    pub fn components(&self) -> Vec<SpectralComponent> {
        let c = &self.coords;
        match self.method {
            Method::Adaptive => c
                .chunks(3)
                .map(|w| SpectralComponent::new(w[0], w[1], w[2]))
                .collect(),
            Method::Threshold => vec![
                SpectralComponent::new(c[0], c[1], 2.0),
                SpectralComponent::new(c[2], c[3], 2.0),
                SpectralComponent::new(c[4], c[5], c[6]),
                SpectralComponent::new(c[7], c[8], c[9]),
            ],
        }
    }

    /// Index of the coordinate `H_1`.
    pub fn h1_index(&self) -> usize {
        1
    }

    pub fn h1(&self) -> f64 {
        self.coords[1]
    }

    pub fn validate(&self) -> Result<()> {
        if self.coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("non-finite parameter"));
        }
        let comps = self.components();
        for c in &comps {
            if !(c.scale > 0.0) {
                return Err(Error::param("spectral scales must be positive"));
            }
            if !(c.hurst > 0.0 && c.hurst < 1.0) {
                return Err(Error::param(format!("Hurst index {} outside (0, 1)", c.hurst)));
            }
            if !(c.beta > 0.0 && c.beta <= BETA_MAX) {
                return Err(Error::param(format!("stability index {} outside (0, {BETA_MAX}]", c.beta)));
            }
        }
        match self.method {
            Method::Adaptive => {
                for w in comps.windows(2) {
                    if !(w[0].hurst < w[1].hurst) {
                        return Err(Error::param("Hurst indices must be strictly increasing"));
                    }
                }
            }
            Method::Threshold => {
                let (h1, h2, hb1, hb2) = (comps[0].hurst, comps[1].hurst, comps[2].hurst, comps[3].hurst);
                if !(h1 < h2.min(hb1).min(hb2)) {
                    return Err(Error::param("H1 must be below H2, H̄1 and H̄2"));
                }
                if !((hb1 - h1) * comps[2].beta < (hb2 - h1) * comps[3].beta) {
                    return Err(Error::param("(H̄1 − H1)β1 < (H̄2 − H1)β2 is violated"));
                }
            }
        }
        Ok(())
    }

    /// Clamp into the iteration domain and restore the ordering constraints
    /// by sort-and-perturb. Returns true when anything changed.
    pub fn project(&mut self) -> bool {
        let before = self.coords.clone();
        let layout = self.layout();
        for (i, (_, k)) in layout.iter().enumerate() {
            let x = &mut self.coords[i];
            match k {
                Kind::Scale => *x = x.max(SCALE_MIN),
                Kind::Hurst => *x = x.clamp(H_MIN, H_MAX),
                Kind::Beta => *x = x.clamp(BETA_MIN, BETA_MAX),
            }
        }
        match self.method {
            Method::Adaptive => {
                let mut comps: Vec<[f64; 3]> = self.coords.chunks(3).map(|w| [w[0], w[1], w[2]]).collect();
                comps.sort_by(|a, b| a[1].total_cmp(&b[1]));
                for j in 1..comps.len() {
                    if comps[j][1] <= comps[j - 1][1] {
                        comps[j][1] = comps[j - 1][1] + TIE;
                    }
                }
                self.coords = comps.concat();
            }
            Method::Threshold => {
                let c = &mut self.coords;
                let lo = c[3].min(c[5]).min(c[8]);
                if c[1] >= lo {
                    c[1] = (lo - TIE).max(H_MIN);
                    if c[3] <= c[1] {
                        c[3] = c[1] + TIE;
                    }
                    if c[5] <= c[1] {
                        c[5] = c[1] + TIE;
                    }
                    if c[8] <= c[1] {
                        c[8] = c[1] + TIE;
                    }
                }
                let key = |hb: f64, b: f64, h1: f64| (hb - h1) * b;
                if key(c[5], c[6], c[1]) >= key(c[8], c[9], c[1]) {
                    for i in 0..3 {
                        c.swap(4 + i, 7 + i);
                    }
                    if key(c[5], c[6], c[1]) >= key(c[8], c[9], c[1]) {
                        c[8] += TIE;
                    }
                }
            }
        }
        self.coords != before
    }
}

/// `∫|g|^β` at the Lévy boundary `H = 1/β`, where `g` is piecewise constant.
pub fn kernel_norm_levy(beta: f64, k: usize) -> f64 {
    let c = difference_weights(k);
    (1..=k)
        .map(|j| c[j..].iter().sum::<f64>().abs().powf(beta))
        .sum()
}

/// `b^β ∫ |g_{H,β,k}|^β`, the scale entering the characteristic exponent.
pub fn spectral_scale(b: f64, hurst: f64, beta: f64, k: usize) -> Result<f64> {
    let norm = if (hurst - 1.0 / beta).abs() < crate::lfsm::kernel::BOUNDARY_EPS {
        kernel_norm_levy(beta, k)
    } else {
        kernel_norm(hurst, beta, k)?
    };
    Ok(b.powf(beta) * norm)
}

/// True parameter of a simulated model for k-th order increments.
pub fn theta_from_model(model: &ModelParams, k: usize, method: Method) -> Result<ParamVector> {
    model.validate()?;
    match method {
        Method::Adaptive => {
            let mut comps = model.components.clone();
            comps.sort_by(|a, b| a.hurst.total_cmp(&b.hurst));
            let mut coords = Vec::with_capacity(3 * comps.len());
            for c in &comps {
                coords.extend([spectral_scale(c.b, c.hurst, c.beta, k)?, c.hurst, c.beta]);
            }
            ParamVector::adaptive(coords)
        }
        Method::Threshold => {
            let mut gauss: Vec<_> = model.components.iter().filter(|c| c.beta == 2.0).copied().collect();
            let mut stab: Vec<_> = model.components.iter().filter(|c| c.beta < 2.0).copied().collect();
            if gauss.len() != 2 || stab.len() != 2 {
                return Err(Error::param(
                    "threshold method needs two Gaussian and two non-Gaussian components",
                ));
            }
            gauss.sort_by(|a, b| a.hurst.total_cmp(&b.hurst));
            let h1 = gauss[0].hurst;
            stab.sort_by(|a, b| ((a.hurst - h1) * a.beta).total_cmp(&((b.hurst - h1) * b.beta)));
            let mut coords = Vec::with_capacity(10);
            for g in &gauss {
                coords.extend([spectral_scale(g.b, g.hurst, 2.0, k)?, g.hurst]);
            }
            for s in &stab {
                coords.extend([spectral_scale(s.b, s.hurst, s.beta, k)?, s.hurst, s.beta]);
            }
            ParamVector::threshold(coords)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lfsm::Component;

    #[test]
    fn adaptive_invariants() {
        assert!(ParamVector::adaptive(vec![1.0, 0.3, 1.5, 1.0, 0.6, 1.8]).is_ok());
        assert!(ParamVector::adaptive(vec![1.0, 0.6, 1.5, 1.0, 0.3, 1.8]).is_err());
        assert!(ParamVector::adaptive(vec![1.0, 0.3, 4.5]).is_err());
        assert!(ParamVector::adaptive(vec![1.0, 0.3, 3.0]).is_ok());
    }

    #[test]
    fn threshold_invariants() {
        let ok = vec![1.0, 0.3, 0.5, 0.5, 0.5, 0.6, 1.2, 0.5, 0.8, 1.5];
        assert!(ParamVector::threshold(ok.clone()).is_ok());
        let mut bad = ok.clone();
        bad[1] = 0.55;
        assert!(ParamVector::threshold(bad).is_err());
        let mut bad = ok;
        bad[9] = 0.5;
        assert!(ParamVector::threshold(bad).is_err());
    }

    #[test]
    fn projection_restores_order() {
        let mut p = ParamVector::raw(Method::Adaptive, vec![1.0, 0.6, 1.5, 2.0, 0.6, 1.8, 1.0, 1.3, 5.0]);
        assert!(p.project());
        assert!(p.validate().is_ok(), "{:?}", p.coords);
        let mut t = ParamVector::raw(Method::Threshold, vec![1.0, 0.7, 0.5, 0.5, 0.5, 0.9, 1.9, 0.5, 0.8, 1.2]);
        assert!(t.project());
        assert!(t.validate().is_ok(), "{:?}", t.coords);
        let mut fine = ParamVector::adaptive(vec![1.0, 0.3, 1.5]).unwrap();
        assert!(!fine.project());
    }

    #[test]
    fn levy_norm_first_order_is_one() {
        assert_eq!(kernel_norm_levy(1.3, 1), 1.0);
        // k = 2: partial sums (-2 + 1, 1) → |−1|^β + 1
        assert_eq!(kernel_norm_levy(1.3, 2), 2.0);
    }

    #[test]
    fn theta_from_model_gaussian_scale() {
        let m = ModelParams::new(vec![Component::new(2.0, 0.7, 2.0)]).unwrap();
        let th = theta_from_model(&m, 1, Method::Adaptive).unwrap();
        assert!((th.coords[0] - 4.0 * crate::lfsm::kernel::gaussian_kernel_norm(0.7, 1)).abs() < 1e-8);
    }
}

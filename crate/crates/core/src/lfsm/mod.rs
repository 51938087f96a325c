//! Model parameters, path simulation and increment panels.

pub mod increments;
pub mod io;
pub mod kernel;
pub mod selfsim;
pub mod simulate;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use increments::{k_order_increments, IncrementPanel};
pub use kernel::{kernel_g, kernel_norm, kernel_norm_truncated};
pub use selfsim::{b_from_btilde, btilde_from_b, self_similarity_check, SelfSimilarityReport};
pub use simulate::{simulate_mixed_path, ConvMethod, Path, Simulator};

/// One lfsm component `b · Y^{H, β}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub b: f64,
    pub hurst: f64,
    pub beta: f64,
}

impl Component {
    pub fn new(b: f64, hurst: f64, beta: f64) -> Self {
        Self { b, hurst, beta }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::param(format!("scale b = {} must be positive", self.b)));
        }
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(Error::param(format!("Hurst index {} outside (0, 1)", self.hurst)));
        }
        if !(self.beta > 0.0 && self.beta <= 2.0) {
            return Err(Error::param(format!("stability index {} outside (0, 2]", self.beta)));
        }
        Ok(())
    }

    /// `H = 1/β` up to the boundary tolerance.
    pub fn is_levy(&self) -> bool {
        (self.hurst - 1.0 / self.beta).abs() < kernel::BOUNDARY_EPS
    }
}

/// Mixed model `X = Σ_j b_j Y^{H_j, β_j}` with independent components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub components: Vec<Component>,
}

impl ModelParams {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        let m = Self { components };
        m.validate()?;
        Ok(m)
    }

    pub fn single(b: f64, hurst: f64, beta: f64) -> Result<Self> {
        Self::new(vec![Component::new(b, hurst, beta)])
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::param("model needs at least one component"));
        }
        for c in &self.components {
            c.validate()?;
        }
        for (i, a) in self.components.iter().enumerate() {
            for b in &self.components[i + 1..] {
                if a.hurst == b.hurst && a.beta == b.beta {
                    return Err(Error::param(format!(
                        "duplicate (H, β) = ({}, {}) pair",
                        a.hurst, a.beta
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn min_hurst(&self) -> f64 {
        self.components.iter().map(|c| c.hurst).fold(f64::INFINITY, f64::min)
    }
}

/// Observation grid and discretisation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingScheme {
    pub n: usize,
    pub delta: f64,
    pub k: usize,
    pub gammas: Vec<usize>,
    pub mesh: usize,
    pub truncation: usize,
    pub burn_in: usize,
}

impl SamplingScheme {
    /// Scheme with default mesh 16 and truncation `200 · k · max γ`.
    pub fn new(n: usize, delta: f64, k: usize, gammas: Vec<usize>) -> Result<Self> {
        let gmax = gammas.iter().copied().max().unwrap_or(1);
        let truncation = 200 * k * gmax;
        let s = Self {
            n,
            delta,
            k,
            gammas,
            mesh: 16,
            truncation,
            burn_in: truncation,
        };
        s.validate()?;
        Ok(s)
    }

    /// `Δ_n = n^{-ρ}`.
    pub fn with_rate(n: usize, rho: f64, k: usize, gammas: Vec<usize>) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::param("rate ρ must be positive"));
        }
        Self::new(n, (n as f64).powf(-rho), k, gammas)
    }

    pub fn with_mesh(mut self, mesh: usize) -> Self {
        self.mesh = mesh;
        self
    }

    pub fn with_truncation(mut self, truncation: usize) -> Self {
        self.truncation = truncation;
        self.burn_in = self.burn_in.max(truncation);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("sample size must be positive"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::param(format!("step Δ = {} must be positive", self.delta)));
        }
        if self.k == 0 {
            return Err(Error::param("differencing order must be at least 1"));
        }
        if self.gammas.is_empty() || self.gammas.contains(&0) {
            return Err(Error::param("lags must be a non-empty set of positive integers"));
        }
        if self.mesh == 0 || self.truncation == 0 {
            return Err(Error::param("mesh and truncation must be positive"));
        }
        if self.burn_in < self.truncation {
            return Err(Error::param("burn-in must cover the kernel truncation"));
        }
        Ok(())
    }

    pub fn max_gamma(&self) -> usize {
        self.gammas.iter().copied().max().unwrap_or(1)
    }

    /// `ρ` with `Δ = n^{-ρ}`.
    pub fn rho(&self) -> f64 {
        -self.delta.ln() / (self.n as f64).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ModelParams::single(1.0, 0.7, 1.5).is_ok());
        assert!(ModelParams::single(-1.0, 0.7, 1.5).is_err());
        assert!(ModelParams::single(1.0, 1.2, 1.5).is_err());
        assert!(ModelParams::new(vec![Component::new(1.0, 0.7, 1.5), Component::new(2.0, 0.7, 1.5)]).is_err());
        let s = SamplingScheme::new(100, 0.01, 2, vec![1, 2]).unwrap();
        assert_eq!(s.truncation, 800);
        assert!(SamplingScheme::new(100, 0.01, 2, vec![]).is_err());
        let r = SamplingScheme::with_rate(1024, 1.0, 1, vec![1]).unwrap();
        assert!((r.rho() - 1.0).abs() < 1e-12);
    }
}

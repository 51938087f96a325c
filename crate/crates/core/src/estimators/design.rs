//! Moment designs: tuples `(λ_r, γ_r)`, test functions and the rescaling rule.

use serde::{Deserialize, Serialize};

use super::params::Method;
use super::rates::{wn_schedule, wn_upper_bound};
use crate::error::{Error, Result};
use crate::spectral::testfn::TestFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentTuple {
    pub lambda: f64,
    pub gamma: usize,
    /// Index into `MomentDesign::functions`.
    #[serde(default)]
    pub function: usize,
}

impl MomentTuple {
    pub fn new(lambda: f64, gamma: usize, function: usize) -> Self {
        Self { lambda, gamma, function }
    }
}

/// Inputs of the `w_n` schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WParams {
    pub eta: f64,
    pub sigma: f64,
    pub c0: f64,
    /// Explicit `w_n`, checked against the upper bound of the schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<f64>,
}

impl Default for WParams {
    fn default() -> Self {
        Self {
            eta: 1.0,
            sigma: 1.0,
            c0: 1.0,
            w: None,
        }
    }
}

/// Regularity designs with closed-form determinants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegularityCase {
    I,
    Ii,
    Iii,
}

impl RegularityCase {
    /// `(λ_r, γ_r)` of the fixed design.
    pub fn tuples(self) -> Vec<(f64, usize)> {
        match self {
            RegularityCase::I => vec![(1.0, 1), (1.0, 2), (1.0, 4), (1.0, 8)],
            RegularityCase::Ii => vec![(1.0, 1), (2.0, 2), (4.0, 2), (8.0, 4), (16.0, 4), (32.0, 8)],
            RegularityCase::Iii => vec![(1.0, 1), (1.0, 2), (2.0, 2), (1.0, 4), (1.0, 8), (2.0, 8)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentDesign {
    pub method: Method,
    pub tuples: Vec<MomentTuple>,
    pub functions: Vec<TestFunction>,
    #[serde(default)]
    pub w_params: WParams,
}

/// Base `λ` of the default adaptive design.
pub const DEFAULT_LAMBDA: f64 = 0.25;

pub fn default_f1() -> TestFunction {
    TestFunction::GaussBump { decay: 1.0 }
}

pub fn default_f2() -> TestFunction {
    TestFunction::threshold(1.0, 0.5, 0.25)
}

impl MomentDesign {
    /// Blocks `(γ, λ) = (g, λ₀), (2g, λ₀), (2g, 2λ₀)` with `g = 4^block` and
    /// `λ₀ = DEFAULT_LAMBDA`, one per component.
    pub fn default_adaptive(q: usize, f: TestFunction) -> Self {
        Self::adaptive_blocks(q, f, DEFAULT_LAMBDA)
    }

    pub fn adaptive_blocks(q: usize, f: TestFunction, lambda: f64) -> Self {
        let mut tuples = Vec::with_capacity(3 * q);
        for b in 0..q {
            let g = 4usize.pow(b as u32);
            tuples.push(MomentTuple::new(lambda, g, 0));
            tuples.push(MomentTuple::new(lambda, 2 * g, 0));
            tuples.push(MomentTuple::new(2.0 * lambda, 2 * g, 0));
        }
        Self {
            method: Method::Adaptive,
            tuples,
            functions: vec![f],
            w_params: WParams::default(),
        }
    }

    /// Case (i) lags on `f1` followed by the case (iii) design on `f2`.
    pub fn default_threshold(f1: TestFunction, f2: TestFunction, w_params: WParams) -> Self {
        Self::threshold_with_case(f1, f2, w_params, RegularityCase::Iii).expect("case iii is a threshold design")
    }

    pub fn threshold_with_case(
        f1: TestFunction,
        f2: TestFunction,
        w_params: WParams,
        case: RegularityCase,
    ) -> Result<Self> {
        if case == RegularityCase::I {
            return Err(Error::Unsupported("case (i) only fixes the f1 block".into()));
        }
        let mut tuples: Vec<MomentTuple> = RegularityCase::I
            .tuples()
            .into_iter()
            .map(|(l, g)| MomentTuple::new(l, g, 0))
            .collect();
        tuples.extend(case.tuples().into_iter().map(|(l, g)| MomentTuple::new(l, g, 1)));
        Ok(Self {
            method: Method::Threshold,
            tuples,
            functions: vec![f1, f2],
            w_params,
        })
    }

    pub fn dim(&self) -> usize {
        self.tuples.len()
    }

    /// Distinct lags, sorted.
    pub fn gammas(&self) -> Vec<usize> {
        let mut g: Vec<usize> = self.tuples.iter().map(|t| t.gamma).collect();
        g.sort_unstable();
        g.dedup();
        g
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.tuples.len() != dim {
            return Err(Error::config(format!(
                "design has {} tuples but the parameter has {dim} coordinates",
                self.tuples.len()
            )));
        }
        for f in &self.functions {
            f.validate()?;
        }
        for t in &self.tuples {
            if !(t.lambda.is_finite() && t.lambda != 0.0) || t.gamma == 0 {
                return Err(Error::config("tuples need λ ≠ 0 and γ ≥ 1"));
            }
            if t.function >= self.functions.len() {
                return Err(Error::config("tuple refers to a missing test function"));
            }
        }
        let mut seen = self.tuples.iter().map(|t| (t.lambda.abs().to_bits(), t.gamma, t.function)).collect::<Vec<_>>();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("design contains duplicate tuples"));
        }
        if self.method == Method::Threshold {
            if dim != 10 || self.functions.len() != 2 {
                return Err(Error::config("threshold design needs 10 tuples and two test functions"));
            }
            if self.tuples[..4].iter().any(|t| t.function != 0) || self.tuples[4..].iter().any(|t| t.function != 1) {
                return Err(Error::config("threshold design: tuples 1-4 use f1, tuples 5-10 use f2"));
            }
            if self.functions[0].second_derivative_at_zero() == 0.0 {
                return Err(Error::config("f1 needs a non-zero second derivative at the origin"));
            }
            if self.functions[1].zero_radius() <= 0.0 {
                return Err(Error::config("f2 must vanish on a neighbourhood of the origin"));
            }
            let w = &self.w_params;
            if !(w.eta > 0.0 && w.sigma > 0.0 && w.c0 > 0.0) {
                return Err(Error::config("w schedule needs eta, sigma, c0 > 0"));
            }
        }
        Ok(())
    }

    /// `w_n` for the threshold rule, one for the adaptive rule.
    pub fn w(&self, delta: f64) -> Result<f64> {
        match self.method {
            Method::Adaptive => Ok(1.0),
            Method::Threshold => {
                let p = &self.w_params;
                match p.w {
                    Some(w) => {
                        let hi = wn_upper_bound(delta, p.eta, p.sigma)?;
                        if !(w > 0.0 && w <= hi * (1.0 + 1e-12)) {
                            return Err(Error::config(format!(
                                "w = {w} violates the schedule bound w ≤ η/(9σ)/√|log Δ| = {hi}"
                            )));
                        }
                        Ok(w)
                    }
                    None => wn_schedule(delta, p.eta, p.sigma, p.c0),
                }
            }
        }
    }
}

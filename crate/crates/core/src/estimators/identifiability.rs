//! Identifiability conditions and the minimal differencing order.

use serde::{Deserialize, Serialize};

use super::params::{Method, ParamVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamFlag {
    pub name: String,
    pub identifiable: bool,
    /// `bound − value` of the governing inequality; infinite when unconstrained.
    pub margin: f64,
    pub condition: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    pub method: Method,
    pub rho: f64,
    pub flags: Vec<ParamFlag>,
    /// Smallest differencing order admitted by the CLT.
    pub min_k: usize,
    pub all_identifiable: bool,
}

impl IdentifiabilityReport {
    pub fn violations(&self) -> Vec<&ParamFlag> {
        self.flags.iter().filter(|f| !f.identifiable).collect()
    }

    pub fn explain(&self) -> String {
        let v = self.violations();
        if v.is_empty() {
            return "all parameters identifiable".into();
        }
        v.iter()
            .map(|f| format!("{}: {} fails (margin {:.4})", f.name, f.condition, f.margin))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Smallest integer strictly above `x`.
fn int_above(x: f64) -> usize {
    (x.floor() as i64 + 1).max(1) as usize
}

fn flag(name: &str, value: f64, bound: f64, condition: &str) -> ParamFlag {
    ParamFlag {
        name: name.into(),
        identifiable: value < bound,
        margin: bound - value,
        condition: condition.into(),
    }
}

/// Per-coordinate identifiability under `Δ_n = n^{-ρ}`.
///
/// A threshold-layout θ may be checked against either method; an adaptive
/// layout only against the adaptive method.
pub fn check_identifiability(theta: &ParamVector, rho: f64, method: Method) -> Result<IdentifiabilityReport> {
    if !(rho > 0.0) {
        return Err(Error::param("rho must be positive"));
    }
    theta.validate()?;
    let names = theta.names();
    let comps = theta.components();
    let h1 = comps[0].hurst;
    let mut flags = Vec::with_capacity(theta.dim());
    let min_k;
    match (theta.method, method) {
        (_, Method::Adaptive) => {
            let per_comp = if theta.method == Method::Adaptive { 3 } else { 0 };
            let mut idx = 0;
            for (j, c) in comps.iter().enumerate() {
                let bound = h1 + 1.0 / (2.0 * rho * c.beta);
                let cond = "H_j < H_1 + 1/(2ρβ_j)";
                let width = if per_comp == 3 { 3 } else if j < 2 { 2 } else { 3 };
                for _ in 0..width {
                    let mut fl = flag(&names[idx], c.hurst, bound, cond);
                    if j == 0 {
                        fl.identifiable = true;
                        fl.margin = f64::INFINITY;
                        fl.condition = "dominant component".into();
                    }
                    flags.push(fl);
                    idx += 1;
                }
            }
            min_k = comps.iter().map(|c| int_above(c.hurst + 1.0 / c.beta)).max().unwrap_or(1);
        }
        (Method::Threshold, Method::Threshold) => {
            let (h2, hb1, b1, hb2, b2) = (comps[1].hurst, comps[2].hurst, comps[2].beta, comps[3].hurst, comps[3].beta);
            let free = |name: &str| ParamFlag {
                name: name.into(),
                identifiable: true,
                margin: f64::INFINITY,
                condition: "dominant component".into(),
            };
            flags.push(free(&names[0]));
            flags.push(free(&names[1]));
            let c2 = "H_2 < H_1 + 1/(4ρ)";
            let bound2 = h1 + 1.0 / (4.0 * rho);
            flags.push(flag(&names[2], h2, bound2, c2));
            flags.push(flag(&names[3], h2, bound2, c2));
            let cs1 = "H̄_1 < H_1 + 1/(ρβ_1)";
            let bs1 = h1 + 1.0 / (rho * b1);
            for i in 4..7 {
                flags.push(flag(&names[i], hb1, bs1, cs1));
            }
            let cs2 = "H̄_2 < H_1 + 1/(2ρβ_2) + β_1(H̄_1 − H_1)/(2β_2)";
            let bs2 = h1 + 1.0 / (2.0 * rho * b2) + b1 / (2.0 * b2) * (hb1 - h1);
            for i in 7..10 {
                flags.push(flag(&names[i], hb2, bs2, cs2));
            }
            min_k = [
                comps[0].hurst + 0.5,
                h2 + 0.5,
                hb1 + 1.0 / b1,
                hb2 + 1.0 / b2,
            ]
            .iter()
            .map(|x| int_above(*x))
            .max()
            .unwrap_or(1);
        }
        (Method::Adaptive, Method::Threshold) => {
            return Err(Error::Unsupported(
                "the threshold conditions need the two-Gaussian, two-stable layout".into(),
            ))
        }
    }
    let all_identifiable = flags.iter().all(|f| f.identifiable);
    Ok(IdentifiabilityReport {
        method,
        rho,
        flags,
        min_k,
        all_identifiable,
    })
}

/// Row labels of the identifiability and rate tables.
pub const TABLE_ROWS: [&str; 4] = ["H1", "H2", "Hbar1", "Hbar2"];

/// Symbolic identifiability condition of a table row for a method.
pub fn table_condition(method: Method, row: usize) -> &'static str {
    match (method, row) {
        (_, 0) => "(0, 1)",
        (_, 1) => "< H1 + 1/(4ρ)",
        (Method::Adaptive, 2) => "< H1 + 1/(2ρβ1)",
        (Method::Threshold, 2) => "< H1 + 1/(ρβ1)",
        (Method::Adaptive, _) => "< H1 + 1/(2ρβ2)",
        (Method::Threshold, _) => "< H1 + 1/(2ρβ2) + β1(Hbar1 − H1)/(2β2)",
    }
}

/// Symbolic convergence rate of a table row for a method.
pub fn table_rate(method: Method, row: usize) -> &'static str {
    match (method, row) {
        (_, 0) => "n^{-1/2}",
        (_, 1) => "n^{2(H2−H1)−1/2}",
        (Method::Adaptive, 2) => "n^{β1(Hbar1−H1)−1/2}",
        (Method::Threshold, 2) => "n^{β1(Hbar1−H1)/2−1/2} (log n)^{β1/4}",
        (Method::Adaptive, _) => "n^{β2(Hbar2−H1)−1/2}",
        (Method::Threshold, _) => "n^{β2(Hbar2−H1)−β1(Hbar1−H1)/2−1/2} (log n)^{β2/2−β1/4}",
    }
}

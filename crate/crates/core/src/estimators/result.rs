//! Estimation results and the top-level estimation entry point.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::design::{MomentDesign, RegularityCase};
use super::equations::EstimatingEquation;
use super::identifiability::{check_identifiability, IdentifiabilityReport};
use super::init::initial_guess;
use super::params::{Method, ParamVector};
use super::rates::{rate_matrix_cbar, rate_matrix_r};
use super::solver::{solve, SolveOptions, SolverPath};
use super::wmatrix::regularity_determinants;
use crate::error::{Error, Result};
use crate::lfsm::IncrementPanel;

/// Normalized determinant below which a fixed design is treated as singular.
pub const SINGULAR_DET: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub method: Method,
    pub names: Vec<String>,
    pub theta_hat: ParamVector,
    pub theta_init: ParamVector,
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
    pub path: SolverPath,
    pub jacobian_condition: f64,
    pub n: usize,
    pub delta: f64,
    pub w: f64,
    /// `rate_matrix^{-1} (θ̂ − θ₀)` when the truth is known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_standardized_errors: Option<Vec<f64>>,
    pub identifiability: IdentifiabilityReport,
    pub warnings: Vec<String>,
}

impl EstimationResult {
    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec!["method".to_string(), "converged".into(), "iterations".into(), "residual_norm".into()];
        h.extend(self.names.iter().cloned());
        h.extend(["n".into(), "delta".into(), "jacobian_condition".into(), "path".into()]);
        h
    }

    pub fn csv_row(&self) -> Vec<String> {
        let mut r = vec![
            format!("{:?}", self.method).to_lowercase(),
            self.converged.to_string(),
            self.iterations.to_string(),
            format!("{:e}", self.residual_norm),
        ];
        r.extend(self.theta_hat.coords.iter().map(|x| format!("{x}")));
        r.extend([
            self.n.to_string(),
            format!("{:e}", self.delta),
            format!("{:e}", self.jacobian_condition),
            format!("{:?}", self.path).to_lowercase(),
        ]);
        r
    }
}

/// Which fixed design the `f2` block of a threshold design matches.
pub fn threshold_case(design: &MomentDesign) -> Option<RegularityCase> {
    if design.method != Method::Threshold || design.tuples.len() != 10 {
        return None;
    }
    let f2: Vec<(f64, usize)> = design.tuples[4..].iter().map(|t| (t.lambda, t.gamma)).collect();
    [RegularityCase::Ii, RegularityCase::Iii]
        .into_iter()
        .find(|c| c.tuples() == f2)
}

fn singular_condition(case: RegularityCase) -> &'static str {
    match case {
        RegularityCase::I => "H1 ≠ H2",
        RegularityCase::Ii => "β1(1 + H̄1) ≠ β2(1 + H̄2) and β1(2 + H̄1) ≠ β2(2 + H̄2)",
        RegularityCase::Iii => "H̄1 β1 ≠ H̄2 β2",
    }
}

/// Screen a threshold θ against the singular loci of the fixed designs.
pub fn check_threshold_regularity(theta: &ParamVector, design: &MomentDesign) -> Result<()> {
    let mut cases = Vec::new();
    let f1: Vec<(f64, usize)> = design.tuples[..4].iter().map(|t| (t.lambda.abs(), t.gamma)).collect();
    if f1.iter().map(|t| t.1).collect::<Vec<_>>() == [1, 2, 4, 8] && f1.iter().all(|t| t.0 == f1[0].0) {
        cases.push(RegularityCase::I);
    }
    if let Some(c) = threshold_case(design) {
        cases.push(c);
    }
    for case in cases {
        let d = regularity_determinants(theta, case)?;
        if d.normalized.abs() < SINGULAR_DET {
            return Err(Error::Regularity(format!(
                "design case ({case:?}) is singular at this θ: the condition {} is violated",
                singular_condition(case)
            )));
        }
    }
    Ok(())
}

/// Estimate θ from a panel.
pub fn estimate(
    panel: &IncrementPanel,
    design: &MomentDesign,
    q: usize,
    init: Option<ParamVector>,
    truth: Option<&ParamVector>,
    opts: &SolveOptions,
) -> Result<EstimationResult> {
    let eq = EstimatingEquation::new(panel.clone(), design.clone())?;
    let theta_init = match init {
        Some(t) => {
            t.validate()?;
            t
        }
        None => initial_guess(panel, design, q)?,
    };
    if design.method == Method::Threshold {
        if let Some(t) = truth {
            check_threshold_regularity(t, design)?;
        }
        check_threshold_regularity(&theta_init, design)?;
    }
    let out = solve(&eq, &theta_init, opts)?;
    let n = panel.rows();
    let rho = (-panel.delta.ln() / (n.max(2) as f64).ln()).max(1e-9);
    let identifiability = check_identifiability(&out.theta, rho, design.method)
        .or_else(|_| check_identifiability(truth.unwrap_or(&theta_init), rho, design.method))?;
    let rate_standardized_errors = match truth {
        Some(t) => {
            let m = match design.method {
                Method::Adaptive => rate_matrix_cbar(t, n, panel.delta)?,
                Method::Threshold => rate_matrix_r(t, n, panel.delta, eq.w())?,
            };
            let diff = DVector::from_iterator(t.dim(), out.theta.coords.iter().zip(&t.coords).map(|(a, b)| a - b));
            m.lu().solve(&diff).map(|v| v.iter().cloned().collect())
        }
        None => None,
    };
    Ok(EstimationResult {
        method: design.method,
        names: out.theta.names(),
        theta_hat: out.theta,
        theta_init,
        iterations: out.iterations,
        residual_norm: out.residual_norm,
        converged: out.converged,
        path: out.path,
        jacobian_condition: out.jacobian_condition,
        n,
        delta: panel.delta,
        w: eq.w(),
        rate_standardized_errors,
        identifiability,
        warnings: out.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::design::{default_f1, default_f2, WParams};

    #[test]
    fn singular_design_is_reported() {
        let d = MomentDesign::default_threshold(default_f1(), default_f2(), WParams::default());
        let th = ParamVector::threshold(vec![1.0, 0.3, 0.5, 0.5, 0.5, 0.75, 1.2, 0.5, 0.9, 1.0]).unwrap();
        let err = check_threshold_regularity(&th, &d).unwrap_err();
        assert!(matches!(err, Error::Regularity(ref m) if m.contains("H̄1 β1 ≠ H̄2 β2")), "{err}");
        let ok = ParamVector::threshold(vec![1.0, 0.3, 0.5, 0.5, 0.5, 0.6, 1.2, 0.5, 0.8, 1.5]).unwrap();
        check_threshold_regularity(&ok, &d).unwrap();
    }
}

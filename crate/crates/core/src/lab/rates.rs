//! Empirical convergence rates of the estimators across an `n`-grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{check_identifiability, estimate, predicted_rates, theta_from_model, Method, SolveOptions};
use crate::stats::weighted_line_fit;

use super::{McCell, McPlan, McReport, SlopeFit, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateOptions {
    /// Largest admitted `|fitted slope − predicted slope|`.
    pub slack: f64,
    pub solve: SolveOptions,
    /// Largest admitted share of failed or non-converged replications.
    pub max_fail: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            slack: 0.15,
            solve: SolveOptions::default(),
            max_fail: 0.2,
        }
    }
}

/// Estimate θ on every replication of every scheme, then regress the
/// log root-mean-square error of each coordinate on `log n` (after removing
/// the predicted `log log n` factor) and compare the slope with the
/// predicted exponent.
pub fn rate_table_experiment(plan: &McPlan, opts: &RateOptions) -> Result<McReport> {
    plan.validate()?;
    if plan.schemes.len() < 2 {
        return Err(Error::config("a rate fit needs at least two sample sizes"));
    }
    if plan.reps < 2 {
        return Err(Error::config("a rate fit needs at least two replications per sample size"));
    }
    let method = plan.design.method;
    let k = plan.schemes[0].k;
    if plan.schemes.iter().any(|s| s.k != k) {
        return Err(Error::config("all schemes of a rate plan must share the increment order k"));
    }
    let rho = plan.rho()?;
    let truth = theta_from_model(&plan.model, k, method)?;
    let ident = check_identifiability(&truth, rho, method)?;
    if !ident.all_identifiable || k < ident.min_k {
        return Err(Error::config(format!(
            "the plan is outside the identifiable region: {}",
            ident.explain()
        )));
    }
    let predicted = predicted_rates(&truth, rho);
    let names = truth.names();
    let q = match method {
        Method::Adaptive => plan.model.components.len(),
        Method::Threshold => 2,
    };
    let mut report = McReport::new("rates", plan.base_seed, plan.reps);
    report.method = Some(method);
    let dim = truth.dim();
    let mut log_n = Vec::new();
    let mut log_rmse: Vec<Vec<f64>> = vec![Vec::new(); dim];
    let mut weights: Vec<Vec<f64>> = vec![Vec::new(); dim];
    for (s, scheme) in plan.schemes.iter().enumerate() {
        let results = plan.map_reps(s, |_, panel| {
            Ok(estimate(panel, &plan.design, q, None, Some(&truth), &opts.solve).ok())
        })?;
        let ok: Vec<Vec<f64>> = results
            .iter()
            .flatten()
            .filter(|r| r.converged)
            .map(|r| r.theta_hat.coords.clone())
            .collect();
        let failed = plan.reps - ok.len();
        let fail_share = failed as f64 / plan.reps as f64;
        let mut cell = McCell::new("all", scheme.n, scheme.delta);
        cell.set("converged", ok.len() as f64).set("failed", failed as f64);
        if fail_share > opts.max_fail {
            report.reliable = false;
            report.warnings.push(format!(
                "n = {}: {failed} of {} replications failed or did not converge",
                scheme.n, plan.reps
            ));
        }
        if ok.len() < 2 {
            report.cells.push(cell);
            continue;
        }
        let nf = scheme.n as f64;
        log_n.push(nf.ln());
        for i in 0..dim {
            let mse = ok.iter().map(|t| (t[i] - truth.coords[i]).powi(2)).sum::<f64>() / ok.len() as f64;
            let rmse = mse.sqrt();
            cell.set(format!("rmse_{}", names[i]), rmse)
                .set(format!("bias_{}", names[i]), ok.iter().map(|t| t[i] - truth.coords[i]).sum::<f64>() / ok.len() as f64);
            log_rmse[i].push(rmse.ln() - predicted[i].log_power * nf.ln().ln());
            // The standard error of ln RMSE is about 1/sqrt(2m).
            weights[i].push(2.0 * ok.len() as f64);
        }
        report.cells.push(cell);
    }
    if log_n.len() < 2 {
        return Err(Error::Numerical {
            msg: "fewer than two sample sizes had enough converged replications for a rate fit".into(),
            achieved: 0.0,
        });
    }
    for i in 0..dim {
        let fit = weighted_line_fit(&log_n, &log_rmse[i], &weights[i]);
        let p = predicted[i].power;
        report.fits.push(SlopeFit {
            name: names[i].clone(),
            slope: fit.slope,
            slope_se: fit.slope_se,
            predicted: p,
        });
        report.verdicts.push(Verdict::below(
            format!("slope_{}", names[i]),
            (fit.slope - p).abs(),
            opts.slack,
        ));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{default_f1, MomentDesign};
    use crate::lfsm::{ModelParams, SamplingScheme};

    fn plan(ns: &[usize]) -> McPlan {
        let design = MomentDesign::default_adaptive(1, default_f1());
        let gammas = design.gammas();
        McPlan {
            model: ModelParams::single(1.0, 0.3, 2.0).unwrap(),
            schemes: ns
                .iter()
                .map(|&n| SamplingScheme::new(n, 1.0 / n as f64, 2, gammas.clone()).unwrap())
                .collect(),
            reps: 20,
            design,
            base_seed: 3,
        }
    }

    #[test]
    fn needs_two_sample_sizes() {
        assert!(matches!(
            rate_table_experiment(&plan(&[512]), &RateOptions::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn gaussian_hurst_rate_has_the_right_sign() {
        let r = rate_table_experiment(&plan(&[512, 4096]), &RateOptions::default()).unwrap();
        let h = r.fits.iter().find(|f| f.name.starts_with('H')).unwrap();
        assert!(h.slope < -0.2, "{h:?}");
        assert_eq!(r.cells.len(), 2);
    }
}

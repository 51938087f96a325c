//! Monte Carlo check of the variance bounds for `S_n(f)`.

use crate::error::{Error, Result};
use crate::estimators::equations::statistic_s;
use crate::estimators::default_f1;
use crate::lfsm::IncrementPanel;
use crate::spectral::TestFunction;
use crate::stats::variance;

use super::regime::variance_scale;
use super::{McCell, McPlan, McReport, Verdict, VerdictStatus};

/// Largest admitted spread `max/min` of `n Var(S_n(f)) / [Σa⁴ + Σb^β]`.
pub const SCALING_SPREAD_TOL: f64 = 3.0;

/// Largest admitted `Var(S_n(f₂)) / Var(S_n(f₁))` at the largest `n`.
pub const SUPPRESSION_TOL: f64 = 0.2;

/// Replication variances of `S_n(f)` for every tuple, from given panels.
pub fn statistic_variances(
    panels: &[IncrementPanel],
    f: &TestFunction,
    u: f64,
    tuples: &[(f64, usize)],
) -> Result<Vec<f64>> {
    let samples = panels
        .iter()
        .map(|p| statistic_s(p, f, u, tuples))
        .collect::<Result<Vec<_>>>()?;
    Ok(column_variances(&samples, tuples.len()))
}

fn column_variances(samples: &[Vec<f64>], d: usize) -> Vec<f64> {
    (0..d)
        .map(|r| {
            let col: Vec<f64> = samples.iter().map(|s| s[r]).collect();
            variance(&col)
        })
        .collect()
}

/// Empirical `Var(S_n(f))` across the `n`-grid of the plan, normalised by
/// the scaling `[Σ_i a_{n,i}⁴ + Σ_j b_{n,j}^{β_j}] / n`. For a test function
/// vanishing near zero, the same panels are also evaluated with the
/// design's first non-thresholded function (the default `f₁` if there is
/// none) so the suppression of the Gaussian part is visible.
pub fn mc_variance_scaling(plan: &McPlan, f: &TestFunction) -> Result<McReport> {
    plan.validate()?;
    f.validate()?;
    if plan.reps < 2 {
        return Err(Error::config("variance estimation needs at least two replications"));
    }
    let tuples: Vec<(f64, usize)> = plan.design.tuples.iter().map(|t| (t.lambda, t.gamma)).collect();
    let thresholded = f.zero_radius() > 0.0;
    let f1 = plan
        .design
        .functions
        .iter()
        .find(|g| g.zero_radius() == 0.0)
        .copied()
        .unwrap_or_else(default_f1);
    let mut report = McReport::new("variance", plan.base_seed, plan.reps);
    report.method = Some(plan.design.method);
    let mut normalized: Vec<Vec<f64>> = vec![Vec::new(); tuples.len()];
    let mut suppression: Vec<Vec<f64>> = vec![Vec::new(); tuples.len()];
    for (s, scheme) in plan.schemes.iter().enumerate() {
        let u = plan.u(s)?;
        let stats = plan.map_reps(s, |_, panel| {
            let a = statistic_s(panel, f, u, &tuples)?;
            let b = if thresholded {
                statistic_s(panel, &f1, u, &tuples)?
            } else {
                Vec::new()
            };
            Ok((a, b))
        })?;
        let main: Vec<Vec<f64>> = stats.iter().map(|x| x.0.clone()).collect();
        let var_f = column_variances(&main, tuples.len());
        let var_f1 = if thresholded {
            let g: Vec<Vec<f64>> = stats.iter().map(|x| x.1.clone()).collect();
            Some(column_variances(&g, tuples.len()))
        } else {
            None
        };
        for (r, &t) in tuples.iter().enumerate() {
            let scale = variance_scale(&plan.model, scheme.k, u, scheme.delta, t)?;
            let nv = scheme.n as f64 * var_f[r];
            let mut cell = McCell::new(format!("lambda={} gamma={}", t.0, t.1), scheme.n, scheme.delta);
            cell.set("u", u)
                .set("var", var_f[r])
                .set("n_var", nv)
                .set("scale", scale)
                .set("normalized", nv / scale);
            normalized[r].push(nv / scale);
            if let Some(v1) = &var_f1 {
                let ratio = var_f[r] / v1[r];
                cell.set("var_f1", v1[r]).set("ratio_f_over_f1", ratio);
                suppression[r].push(ratio);
            }
            report.cells.push(cell);
        }
    }
    for (r, &t) in tuples.iter().enumerate() {
        let tag = format!("lambda={} gamma={}", t.0, t.1);
        let v = &normalized[r];
        if v.iter().all(|x| *x == 0.0) {
            report.verdicts.push(Verdict::with_status(
                format!("scaling_spread {tag}"),
                VerdictStatus::Degenerate,
                "all replication variances are zero",
            ));
            continue;
        }
        let hi = v.iter().cloned().fold(f64::MIN, f64::max);
        let lo = v.iter().cloned().fold(f64::MAX, f64::min);
        report
            .verdicts
            .push(Verdict::below(format!("scaling_spread {tag}"), hi / lo, SCALING_SPREAD_TOL));
        if thresholded {
            let s = &suppression[r];
            let last = *s.last().unwrap();
            report
                .verdicts
                .push(Verdict::below(format!("suppression_at_max_n {tag}"), last, SUPPRESSION_TOL));
            let worst_step = s.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
            report.verdicts.push(Verdict::judged(
                format!("suppression_decreasing {tag}"),
                worst_step,
                1.0,
                s.len() < 2 || worst_step < 1.0,
                "largest ratio of consecutive values < tolerance",
            ));
        }
    }
    Ok(report)
}

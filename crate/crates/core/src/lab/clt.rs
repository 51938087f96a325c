//! Monte Carlo check of the normal limit of `S_n(f)`.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimators::equations::statistic_s;
use crate::spectral::TestFunction;
use crate::stats::{anderson_darling_normal, covariance, ks_one_sample, mean, normal_cdf, variance};

use super::regime::{validate_regime, CltCase};
use super::{McCell, McPlan, McReport, Verdict, VerdictStatus, MIN_REPS_FOR_P};

/// Significance level of the normality and correlation tests.
pub const CLT_LEVEL: f64 = 0.01;

fn standardize(x: &[f64]) -> Option<Vec<f64>> {
    let m = mean(x);
    let sd = variance(x).sqrt();
    if !(sd > 0.0) {
        return None;
    }
    Some(x.iter().map(|v| (v - m) / sd).collect())
}

/// Two-sided p-value of zero correlation (Fisher transform).
fn correlation_p(r: f64, n: usize) -> f64 {
    let z = r.clamp(-0.999_999, 0.999_999).atanh() * ((n as f64) - 3.0).max(1.0).sqrt();
    let nd = Normal::new(0.0, 1.0).expect("standard normal");
    2.0 * (1.0 - nd.cdf(z.abs()))
}

/// Replicate `S_n(f)` for every scheme of the plan and test the shape of
/// its distribution against the normal law, after standardizing by the
/// Monte Carlo mean and variance. The plan must sit in the regime of `case`.
/// Case (v) tests the pair `(S_n(f), S_n(f2))` marginally and for zero
/// correlation.
pub fn mc_clt_check(plan: &McPlan, f: &TestFunction, case: CltCase, f2: Option<&TestFunction>) -> Result<McReport> {
    plan.validate()?;
    f.validate()?;
    if plan.reps < MIN_REPS_FOR_P {
        return Err(Error::config(format!(
            "normality tests need at least {MIN_REPS_FOR_P} replications, the plan has {}",
            plan.reps
        )));
    }
    if case == CltCase::V && f2.is_none() {
        return Err(Error::config("case (v) needs a second (thresholded) test function"));
    }
    let rho = plan.rho()?;
    let tuples: Vec<(f64, usize)> = plan.design.tuples.iter().map(|t| (t.lambda, t.gamma)).collect();
    let mut report = McReport::new("clt", plan.base_seed, plan.reps);
    report.method = Some(plan.design.method);
    for &t in &tuples {
        let k = plan.schemes[0].k;
        let reg = validate_regime(&plan.model, k, rho, &plan.design, t, f, f2, case)?;
        report.warnings.push(format!("lambda={} gamma={}: {}", t.0, t.1, reg.explain()));
    }
    for (s, scheme) in plan.schemes.iter().enumerate() {
        let u = plan.u(s)?;
        let stats = plan.map_reps(s, |_, panel| {
            let a = statistic_s(panel, f, u, &tuples)?;
            let b = match f2 {
                Some(g) => statistic_s(panel, g, u, &tuples)?,
                None => Vec::new(),
            };
            Ok((a, b))
        })?;
        for (r, &t) in tuples.iter().enumerate() {
            let tag = format!("n={} lambda={} gamma={}", scheme.n, t.0, t.1);
            let x: Vec<f64> = stats.iter().map(|p| p.0[r]).collect();
            let mut cell = McCell::new(format!("lambda={} gamma={}", t.0, t.1), scheme.n, scheme.delta);
            cell.set("mean", mean(&x)).set("var", variance(&x)).set("n_var", scheme.n as f64 * variance(&x));
            let judge = |name: &str, prefix: &str, z: Option<Vec<f64>>, cell: &mut McCell, report: &mut McReport| match z {
                None => report.verdicts.push(Verdict::with_status(
                    format!("{name} {tag}"),
                    VerdictStatus::Degenerate,
                    "replications are constant; test skipped",
                )),
                Some(z) => {
                    let ks = ks_one_sample(&z, normal_cdf);
                    let ad = anderson_darling_normal(&z);
                    cell.set(format!("{prefix}ks_stat"), ks.statistic)
                        .set(format!("{prefix}ks_p"), ks.p_value)
                        .set(format!("{prefix}ad_stat"), ad.statistic)
                        .set(format!("{prefix}ad_p"), ad.p_value);
                    report.verdicts.push(Verdict::above(format!("{name} {tag}"), ks.p_value, CLT_LEVEL));
                }
            };
            judge("ks", "", standardize(&x), &mut cell, &mut report);
            if f2.is_some() {
                let y: Vec<f64> = stats.iter().map(|p| p.1[r]).collect();
                judge("ks_f2", "f2_", standardize(&y), &mut cell, &mut report);
                let (vx, vy) = (variance(&x), variance(&y));
                if vx > 0.0 && vy > 0.0 {
                    let corr = covariance(&x, &y) / (vx * vy).sqrt();
                    let p = correlation_p(corr, x.len());
                    cell.set("corr", corr).set("corr_p", p);
                    report.verdicts.push(Verdict::above(format!("zero_correlation {tag}"), p, CLT_LEVEL));
                }
            }
            report.cells.push(cell);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{default_f1, MomentDesign, MomentTuple};
    use crate::lfsm::{ModelParams, SamplingScheme};
    use crate::lab::McPlan;

    fn plan(reps: usize, model: ModelParams) -> McPlan {
        let mut design = MomentDesign::default_adaptive(1, default_f1());
        design.tuples = vec![MomentTuple::new(1.0, 1, 0)];
        McPlan {
            model,
            schemes: vec![SamplingScheme::new(1024, 1.0 / 1024.0, 2, vec![1]).unwrap()],
            reps,
            design,
            base_seed: 5,
        }
    }

    #[test]
    fn refuses_small_plans_and_wrong_regimes() {
        let m = ModelParams::single(1.0, 0.3, 2.0).unwrap();
        assert!(matches!(mc_clt_check(&plan(10, m.clone()), &default_f1(), CltCase::I, None), Err(Error::Config(_))));
        let err = mc_clt_check(&plan(60, m), &default_f1(), CltCase::Ii, None).unwrap_err();
        assert!(matches!(err, Error::Config(ref s) if s.contains("b > 0")), "{err}");
    }

    #[test]
    fn thresholded_statistic_at_tiny_scale_is_degenerate() {
        let m = ModelParams::single(1e-9, 0.3, 2.0).unwrap();
        let f2 = crate::spectral::TestFunction::threshold(1.0, 0.5, 1.0);
        let mut p = plan(60, m);
        p.design.functions = vec![f2];
        let r = mc_clt_check(&p, &f2, CltCase::I, None).unwrap();
        assert!(r.verdicts.iter().all(|v| v.status == VerdictStatus::Degenerate));
    }

    #[test]
    fn fisher_p_values() {
        assert!((correlation_p(0.0, 100) - 1.0).abs() < 1e-12);
        assert!(correlation_p(0.5, 100) < 1e-6);
    }
}

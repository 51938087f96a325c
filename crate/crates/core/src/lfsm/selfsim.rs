//! Transformed scales `b̃` and a distributional self-similarity check.

use serde::{Deserialize, Serialize};

use super::{k_order_increments, ModelParams, SamplingScheme, Simulator};
use crate::error::{Error, Result};
use crate::estimators::params::spectral_scale;
use crate::stable::RngHandle;
use crate::stats::ks_two_sample;

/// `b̃_j = b_j^{β_j} ∫|g_j|^{β_j}` for every component.
pub fn btilde_from_b(params: &ModelParams, k: usize) -> Result<Vec<f64>> {
    params.validate()?;
    params
        .components
        .iter()
        .map(|c| spectral_scale(c.b, c.hurst, c.beta, k))
        .collect()
}

/// Inverse of [`btilde_from_b`]: natural scales from transformed ones, the
/// `(H_j, β_j)` being taken from `params`.
pub fn b_from_btilde(btilde: &[f64], params: &ModelParams, k: usize) -> Result<Vec<f64>> {
    if btilde.len() != params.components.len() {
        return Err(Error::param("one transformed scale per component is required"));
    }
    params
        .components
        .iter()
        .zip(btilde)
        .map(|(c, &bt)| {
            if !(bt > 0.0 && bt.is_finite()) {
                return Err(Error::param(format!("transformed scale {bt} must be positive")));
            }
            Ok((bt / spectral_scale(1.0, c.hurst, c.beta, k)?).powf(1.0 / c.beta))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarityReport {
    pub gamma: usize,
    pub statistic: f64,
    pub p_value: f64,
    /// Size of each of the two samples.
    pub size: usize,
}

/// Two-sample KS comparison of non-overlapping lag-`γ` increments with
/// `γ^H`-scaled lag-1 increments, pooled over `reps` paths.
pub fn self_similarity_check(
    params: &ModelParams,
    scheme: &SamplingScheme,
    gamma: usize,
    reps: usize,
    seed: u64,
) -> Result<SelfSimilarityReport> {
    params.validate()?;
    if params.components.len() != 1 {
        return Err(Error::Unsupported(
            "a mixture of components with distinct Hurst indices is not self-similar".into(),
        ));
    }
    if gamma == 0 || reps == 0 {
        return Err(Error::param("lag and replication count must be positive"));
    }
    let h = params.components[0].hurst;
    let mut s = scheme.clone();
    s.k = 1;
    s.gammas = vec![1, gamma];
    let sim = Simulator::new(params, &s)?;
    let root = RngHandle::new(seed, 0);
    let (mut at_gamma, mut at_one) = (Vec::new(), Vec::new());
    for r in 0..reps {
        let path = sim.simulate(&root.child(r as u64))?;
        let panel = k_order_increments(&path, 1, &s.gammas)?;
        let lag = panel.column_for(gamma).expect("lag present");
        let unit = panel.column_for(1).expect("lag present");
        let m = lag.len().div_ceil(gamma);
        at_gamma.extend(lag.iter().step_by(gamma));
        at_one.extend(unit[..m].iter().map(|x| x * (gamma as f64).powf(h)));
    }
    let t = ks_two_sample(&at_gamma, &at_one);
    Ok(SelfSimilarityReport {
        gamma,
        statistic: t.statistic,
        p_value: t.p_value,
        size: at_gamma.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_round_trip() {
        let m = ModelParams::new(vec![
            super::super::Component::new(2.0, 0.7, 2.0),
            super::super::Component::new(0.3, 0.4, 1.5),
        ])
        .unwrap();
        let bt = btilde_from_b(&m, 2).unwrap();
        let b = b_from_btilde(&bt, &m, 2).unwrap();
        assert!((b[0] - 2.0).abs() < 2e-10 && (b[1] - 0.3).abs() < 3e-11);
        let one = ModelParams::single(2.0, 0.7, 2.0).unwrap();
        let k1 = btilde_from_b(&one, 1).unwrap()[0];
        assert!((k1 - 4.0 * crate::lfsm::kernel_norm(0.7, 2.0, 1).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn unit_lag_is_trivially_self_similar() {
        let m = ModelParams::single(1.0, 0.4, 2.0).unwrap();
        let s = SamplingScheme::new(500, 1.0 / 500.0, 1, vec![1]).unwrap();
        let r = self_similarity_check(&m, &s, 1, 2, 3).unwrap();
        assert_eq!(r.statistic, 0.0);
    }

    #[test]
    fn gaussian_increments_scale_with_the_lag() {
        let m = ModelParams::single(1.0, 0.4, 2.0).unwrap();
        let s = SamplingScheme::new(4000, 1.0 / 4000.0, 1, vec![1]).unwrap();
        let r = self_similarity_check(&m, &s, 2, 5, 9).unwrap();
        assert!(r.size >= 9000);
        assert!(r.p_value > 0.01, "{r:?}");
    }

    #[test]
    fn mixtures_are_refused() {
        let m = ModelParams::new(vec![
            super::super::Component::new(1.0, 0.3, 2.0),
            super::super::Component::new(1.0, 0.7, 1.5),
        ])
        .unwrap();
        let s = SamplingScheme::new(100, 0.01, 1, vec![1]).unwrap();
        assert!(matches!(self_similarity_check(&m, &s, 2, 1, 1), Err(Error::Unsupported(_))));
    }
}

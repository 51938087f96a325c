//! Monte Carlo experiments for the variance bounds, the central limit
//! theorems, the asymptotic covariances and the convergence rates.

pub mod asymcov;
pub mod clt;
pub mod rates;
pub mod regime;
pub mod variance;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::params::{spectral_scale, Method};
use crate::estimators::MomentDesign;
use crate::lfsm::{k_order_increments, IncrementPanel, ModelParams, SamplingScheme, Simulator};
use crate::stable::RngHandle;

pub use asymcov::{
    estimate_asymp_cov_g, estimate_asymp_cov_threshold, fbm_kdiff_cov, sigma1_exact, sigma_tilde_gaussian_exact,
    AsympCovOptions, LagSum, ThresholdCov,
};
pub use clt::mc_clt_check;
pub use rates::{rate_table_experiment, RateOptions};
pub use regime::{validate_regime, CltCase, Limit, RegimeReport};
pub use variance::mc_variance_scaling;

/// JSON has no NaN: non-finite numbers are written as `null` and read back as NaN.
mod nullable {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }

    pub mod map {
        use super::*;

        pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
            s.collect_map(m.iter().map(|(k, v)| (k, v.is_finite().then_some(*v))))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
            let m = BTreeMap::<String, Option<f64>>::deserialize(d)?;
            Ok(m.into_iter().map(|(k, v)| (k, v.unwrap_or(f64::NAN))).collect())
        }
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|x| x.is_finite().then_some(*x)))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            let v = Vec::<Option<f64>>::deserialize(d)?;
            Ok(v.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
        }
    }
}

/// Version tag written into every report.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Smallest replication count for which p-values are reported.
pub const MIN_REPS_FOR_P: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McPlan {
    pub model: ModelParams,
    pub schemes: Vec<SamplingScheme>,
    pub reps: usize,
    pub design: MomentDesign,
    pub base_seed: u64,
}

impl McPlan {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.schemes.is_empty() {
            return Err(Error::config("a plan needs at least one sampling scheme"));
        }
        if self.reps == 0 {
            return Err(Error::config("a plan needs at least one replication"));
        }
        if self.design.tuples.is_empty() {
            return Err(Error::config("a plan needs at least one moment tuple"));
        }
        let need = self.design.gammas();
        for s in &self.schemes {
            s.validate()?;
            if let Some(g) = need.iter().find(|g| !s.gammas.contains(g)) {
                return Err(Error::config(format!("scheme with n = {} lacks the design lag γ = {g}", s.n)));
            }
        }
        Ok(())
    }

    /// Common `ρ` of the scheme grid (`Δ = n^{-ρ}`).
    pub fn rho(&self) -> Result<f64> {
        let r0 = self.schemes[0].rho();
        for s in &self.schemes[1..] {
            if (s.rho() - r0).abs() > 1e-6 * r0.abs().max(1.0) {
                return Err(Error::config("all schemes of a plan must share Δ = n^{-ρ}"));
            }
        }
        Ok(r0)
    }

    /// `w` of the rescaling `u = w Δ^{-H_1}` at step `delta`.
    pub fn w(&self, delta: f64) -> Result<f64> {
        match self.design.method {
            Method::Adaptive => Ok(1.0),
            Method::Threshold => self.design.w(delta),
        }
    }

    /// Rescaling factor `u_n(θ₀)` for scheme `s`.
    pub fn u(&self, s: usize) -> Result<f64> {
        let d = self.schemes[s].delta;
        Ok(self.w(d)? * d.powf(-self.model.min_hurst()))
    }

    /// Root handle of replication `r` in scheme `s`.
    pub fn handle(&self, s: usize, r: usize) -> RngHandle {
        RngHandle::new(self.base_seed, 0).child(s as u64).child(r as u64)
    }

    /// Run `stat` on the increment panel of every replication of scheme `s`,
    /// in parallel; the output order is the replication order.
    pub fn map_reps<T, F>(&self, s: usize, stat: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize, &IncrementPanel) -> Result<T> + Sync,
    {
        let scheme = &self.schemes[s];
        let sim = Simulator::new(&self.model, scheme)?;
        (0..self.reps)
            .into_par_iter()
            .map(|r| {
                let path = sim.simulate(&self.handle(s, r))?;
                let panel = k_order_increments(&path, scheme.k, &scheme.gammas)?;
                stat(r, &panel)
            })
            .collect()
    }

    /// Spectral scales `b̃_j` (or `ã_j`) of the model at order `k`.
    pub fn spectral_scales(&self, k: usize) -> Result<Vec<f64>> {
        self.model
            .components
            .iter()
            .map(|c| spectral_scale(c.b, c.hurst, c.beta, k))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictStatus {
    Pass,
    Fail,
    Degenerate,
    Skipped,
}

/// Outcome of one check, with the tolerance it was judged against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub status: VerdictStatus,
    #[serde(with = "nullable")]
    pub value: f64,
    #[serde(with = "nullable")]
    pub tolerance: f64,
    /// How `value` is compared with `tolerance`.
    pub rule: String,
}

impl Verdict {
    pub fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self::judged(name, value, tolerance, value < tolerance, "value < tolerance")
    }

    pub fn above(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self::judged(name, value, tolerance, value > tolerance, "value > tolerance")
    }

    pub fn judged(name: impl Into<String>, value: f64, tolerance: f64, ok: bool, rule: &str) -> Self {
        Self {
            name: name.into(),
            status: if ok { VerdictStatus::Pass } else { VerdictStatus::Fail },
            value,
            tolerance,
            rule: rule.into(),
        }
    }

    pub fn with_status(name: impl Into<String>, status: VerdictStatus, rule: &str) -> Self {
        Self {
            name: name.into(),
            status,
            value: f64::NAN,
            tolerance: f64::NAN,
            rule: rule.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == VerdictStatus::Pass
    }
}

/// Summary of one scheme (or one scheme and label) of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCell {
    pub label: String,
    pub n: usize,
    pub delta: f64,
    #[serde(with = "nullable::map")]
    pub values: BTreeMap<String, f64>,
}

impl McCell {
    pub fn new(label: impl Into<String>, n: usize, delta: f64) -> Self {
        Self {
            label: label.into(),
            n,
            delta,
            values: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, key: impl Into<String>, v: f64) -> &mut Self {
        self.values.insert(key.into(), v);
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }
}

/// Fitted log-log slope of a series against `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub name: String,
    #[serde(with = "nullable")]
    pub slope: f64,
    #[serde(with = "nullable")]
    pub slope_se: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedMatrix {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    #[serde(with = "nullable::vec")]
    pub data: Vec<f64>,
}

impl NamedMatrix {
    pub fn from_dmatrix(name: impl Into<String>, m: &nalgebra::DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Self {
            name: name.into(),
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub schema_version: u32,
    pub experiment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    pub base_seed: u64,
    pub reps: usize,
    pub cells: Vec<McCell>,
    pub fits: Vec<SlopeFit>,
    pub verdicts: Vec<Verdict>,
    #[serde(default)]
    pub matrices: Vec<NamedMatrix>,
    pub warnings: Vec<String>,
    /// False when too many replications failed for the summaries to be trusted.
    pub reliable: bool,
}

impl McReport {
    pub fn new(experiment: &str, base_seed: u64, reps: usize) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            experiment: experiment.into(),
            method: None,
            base_seed,
            reps,
            cells: Vec::new(),
            fits: Vec::new(),
            verdicts: Vec::new(),
            matrices: Vec::new(),
            warnings: Vec::new(),
            reliable: true,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.status != VerdictStatus::Fail)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    /// Flat per-cell table: fixed columns then the union of value keys.
    pub fn csv_table(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let mut keys: Vec<String> = Vec::new();
        for c in &self.cells {
            for k in c.values.keys() {
                if !keys.contains(k) {
                    keys.push(k.clone());
                }
            }
        }
        let mut header = vec!["experiment".to_string(), "label".into(), "n".into(), "delta".into()];
        header.extend(keys.iter().cloned());
        let rows = self
            .cells
            .iter()
            .map(|c| {
                let mut r = vec![self.experiment.clone(), c.label.clone(), c.n.to_string(), format!("{:e}", c.delta)];
                r.extend(keys.iter().map(|k| c.get(k).map_or(String::new(), |v| format!("{v:e}"))));
                r
            })
            .collect();
        (header, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::default_f1;

    fn plan(reps: usize) -> McPlan {
        McPlan {
            model: ModelParams::single(1.0, 0.7, 1.5).unwrap(),
            schemes: vec![SamplingScheme::new(256, 1.0 / 256.0, 2, vec![1, 2]).unwrap()],
            reps,
            design: MomentDesign::default_adaptive(1, default_f1()),
            base_seed: 11,
        }
    }

    #[test]
    fn replications_do_not_depend_on_thread_count() {
        let p = plan(8);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| p.map_reps(0, |_, panel| Ok(panel.columns[0].clone())).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn plan_rejects_missing_lags() {
        let mut p = plan(2);
        p.schemes[0].gammas = vec![1];
        assert!(matches!(p.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn non_finite_values_survive_json() {
        let mut r = McReport::new("clt", 1, 60);
        r.verdicts.push(Verdict::with_status("ks", VerdictStatus::Degenerate, "skipped"));
        let mut c = McCell::new("a", 10, 0.1);
        c.set("ratio", f64::NAN).set("x", 1.5);
        r.cells.push(c);
        let text = serde_json::to_string(&r).unwrap();
        let back: McReport = serde_json::from_str(&text).unwrap();
        assert!(back.verdicts[0].value.is_nan());
        assert!(back.cells[0].get("ratio").unwrap().is_nan());
        assert_eq!(back.cells[0].get("x"), Some(1.5));
    }

    #[test]
    fn csv_table_unions_keys() {
        let mut r = McReport::new("variance", 1, 2);
        let mut a = McCell::new("a", 10, 0.1);
        a.set("x", 1.0);
        let mut b = McCell::new("b", 20, 0.05);
        b.set("y", 2.0);
        r.cells = vec![a, b];
        let (h, rows) = r.csv_table();
        assert_eq!(h[4..], ["x".to_string(), "y".to_string()]);
        assert_eq!(rows[1][4], "");
    }
}

//! Run configuration: TOML (or the emitted resolved JSON), schema-versioned,
//! unknown keys rejected.

use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    default_f1, default_f2, MomentDesign, MomentTuple, Method, ParamVector, RegularityCase, SolveOptions, WParams,
    DEFAULT_LAMBDA,
};
use crate::lab::{AsympCovOptions, CltCase, McPlan, RateOptions};
use crate::lfsm::{ModelParams, SamplingScheme};
use crate::spectral::TestFunction;

/// Version of the configuration schema read and written by this build.
pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Bin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Variance,
    Clt,
    Rates,
    Asymcov,
}

/// Which design test function an experiment uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionChoice {
    F1,
    F2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    /// Step `Δ`; when absent `Δ = n^{-ρ}`.
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Lags to difference at; defaults to the lags of the design.
    #[serde(default)]
    pub gammas: Option<Vec<usize>>,
    #[serde(default = "default_mesh")]
    pub mesh: usize,
    #[serde(default)]
    pub truncation: Option<usize>,
    #[serde(default)]
    pub burn_in: Option<usize>,
}

fn default_n() -> usize {
    1024
}
fn default_k() -> usize {
    2
}
fn default_mesh() -> usize {
    16
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            n: default_n(),
            delta: None,
            rho: None,
            k: default_k(),
            gammas: None,
            mesh: default_mesh(),
            truncation: None,
            burn_in: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    #[serde(default = "default_method")]
    pub method: Method,
    /// Base `λ` of the default adaptive design.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Number of components the adaptive method fits; defaults to the model's.
    #[serde(default)]
    pub q: Option<usize>,
    /// Fixed design of the `f₂` block of the threshold method.
    #[serde(default = "default_case")]
    pub case: RegularityCase,
    #[serde(default = "default_f1")]
    pub f1: TestFunction,
    #[serde(default = "default_f2")]
    pub f2: TestFunction,
    #[serde(default)]
    pub w: WParams,
    /// Explicit tuples; `function` indexes `[f1, f2]`.
    #[serde(default)]
    pub tuples: Option<Vec<MomentTuple>>,
}

fn default_method() -> Method {
    Method::Adaptive
}
fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}
fn default_case() -> RegularityCase {
    RegularityCase::Iii
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            method: default_method(),
            lambda: default_lambda(),
            q: None,
            case: default_case(),
            f1: default_f1(),
            f2: default_f2(),
            w: WParams::default(),
            tuples: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub options: SolveOptions,
    /// Initial iterate overriding the characteristic-function initializer.
    #[serde(default)]
    pub init: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            options: SolveOptions::default(),
            init: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default)]
    pub experiment: Option<Experiment>,
    #[serde(default = "default_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_clt_case")]
    pub case: CltCase,
    /// Test function of the variance and CLT experiments.
    #[serde(default = "default_choice")]
    pub function: FunctionChoice,
    /// Second statistic of CLT case (v).
    #[serde(default)]
    pub second_function: Option<FunctionChoice>,
    #[serde(default)]
    pub asymcov: AsympCovOptions,
    #[serde(default = "default_slack")]
    pub slack: f64,
    #[serde(default = "default_max_fail")]
    pub max_fail: f64,
}

fn default_grid() -> Vec<usize> {
    vec![1 << 10, 1 << 12, 1 << 14]
}
fn default_reps() -> usize {
    200
}
fn default_clt_case() -> CltCase {
    CltCase::I
}
fn default_choice() -> FunctionChoice {
    FunctionChoice::F1
}
fn default_slack() -> f64 {
    RateOptions::default().slack
}
fn default_max_fail() -> f64 {
    RateOptions::default().max_fail
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            n_grid: default_grid(),
            reps: default_reps(),
            case: default_clt_case(),
            function: default_choice(),
            second_function: None,
            asymcov: AsympCovOptions::default(),
            slack: default_slack(),
            max_fail: default_max_fail(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    #[serde(default)]
    pub threads: usize,
}

fn default_dir() -> String {
    "out".into()
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            formats: default_formats(),
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub model: ModelParams,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub design: DesignConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_seed() -> u64 {
    1
}

impl RunConfig {
    /// Parse TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let probe: std::result::Result<Probe, String> = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| e.to_string())
        } else {
            toml::from_str(text).map_err(|e| e.to_string())
        };
        match probe {
            Ok(p) if p.schema_version != CONFIG_SCHEMA_VERSION => {
                return Err(Error::config(format!(
                    "config schema_version {} is not supported; this build reads version {CONFIG_SCHEMA_VERSION}",
                    p.schema_version
                )))
            }
            Err(e) => return Err(Error::config(format!("config needs an integer schema_version: {e}"))),
            Ok(_) => {}
        }
        let cfg: RunConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::config(e.to_string()))?
        };
        Ok(cfg)
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Fill every default so the result fully determines a run.
    pub fn resolve(mut self) -> Result<Self> {
        self.model.validate()?;
        let n = self.scheme.n;
        if n < 2 {
            return Err(Error::config("scheme.n must be at least 2"));
        }
        let nf = n as f64;
        let (delta, rho) = match (self.scheme.delta, self.scheme.rho) {
            (Some(d), Some(r)) => {
                if ((nf.powf(-r) - d) / d).abs() > 1e-9 {
                    return Err(Error::config(format!("scheme.delta = {d} disagrees with scheme.rho = {r}")));
                }
                (d, r)
            }
            (Some(d), None) => (d, -d.ln() / nf.ln()),
            (None, Some(r)) => (nf.powf(-r), r),
            (None, None) => (1.0 / nf, 1.0),
        };
        if !(delta > 0.0 && rho > 0.0) {
            return Err(Error::config("scheme needs Δ in (0, 1) and ρ > 0"));
        }
        self.scheme.delta = Some(delta);
        self.scheme.rho = Some(rho);
        if self.design.q.is_none() {
            self.design.q = Some(self.model.components.len());
        }
        if self.design.tuples.is_none() {
            self.design.tuples = Some(self.build_default_tuples()?);
        }
        let design = self.design()?;
        let mut gammas = self.scheme.gammas.clone().unwrap_or_default();
        for g in design.gammas() {
            if !gammas.contains(&g) {
                gammas.push(g);
            }
        }
        gammas.sort_unstable();
        self.scheme.gammas = Some(gammas.clone());
        let gmax = gammas.iter().copied().max().unwrap_or(1);
        let trunc = self.scheme.truncation.unwrap_or(200 * self.scheme.k * gmax);
        self.scheme.truncation = Some(trunc);
        self.scheme.burn_in = Some(self.scheme.burn_in.unwrap_or(trunc));
        if self.output.formats.is_empty() {
            return Err(Error::config("output.formats must name at least one format"));
        }
        Ok(self)
    }

    fn build_default_tuples(&self) -> Result<Vec<MomentTuple>> {
        let d = &self.design;
        let design = match d.method {
            Method::Adaptive => MomentDesign::adaptive_blocks(d.q.unwrap_or(1), d.f1, d.lambda),
            Method::Threshold => MomentDesign::threshold_with_case(d.f1, d.f2, d.w, d.case)?,
        };
        Ok(design.tuples)
    }

    /// Moment design of a resolved config.
    pub fn design(&self) -> Result<MomentDesign> {
        let d = &self.design;
        let tuples = d
            .tuples
            .clone()
            .ok_or_else(|| Error::config("design tuples are unresolved"))?;
        let functions = match d.method {
            Method::Adaptive if tuples.iter().all(|t| t.function == 0) => vec![d.f1],
            _ => vec![d.f1, d.f2],
        };
        let design = MomentDesign {
            method: d.method,
            tuples,
            functions,
            w_params: d.w,
        };
        let dim = match d.method {
            Method::Adaptive => 3 * d.q.unwrap_or(1),
            Method::Threshold => 10,
        };
        design.validate(dim).map_err(|e| Error::config(e.to_string()))?;
        Ok(design)
    }

    pub fn q(&self) -> usize {
        self.design.q.unwrap_or(self.model.components.len())
    }

    fn scheme_for(&self, n: usize, delta: f64) -> Result<SamplingScheme> {
        let gammas = self.scheme.gammas.clone().unwrap_or_else(|| vec![1]);
        let k = self.scheme.k;
        let gmax = gammas.iter().copied().max().unwrap_or(1);
        if n < k * gmax + 2 {
            return Err(Error::input(format!(
                "n = {n} is too small for increments of order k = {k} at lag γ = {gmax} (needs n ≥ {})",
                k * gmax + 2
            )));
        }
        let mut s = SamplingScheme::new(n, delta, k, gammas)?.with_mesh(self.scheme.mesh);
        if let Some(t) = self.scheme.truncation {
            s.truncation = t;
        }
        if let Some(b) = self.scheme.burn_in {
            s.burn_in = b;
        }
        s.validate().map_err(|e| Error::config(e.to_string()))?;
        Ok(s)
    }

    /// Sampling scheme of a resolved config.
    pub fn scheme(&self) -> Result<SamplingScheme> {
        let delta = self.scheme.delta.ok_or_else(|| Error::config("scheme.delta is unresolved"))?;
        self.scheme_for(self.scheme.n, delta)
    }

    /// Monte Carlo plan over `mc.n_grid` with `Δ = n^{-ρ}`.
    pub fn plan(&self) -> Result<McPlan> {
        let rho = self.scheme.rho.ok_or_else(|| Error::config("scheme.rho is unresolved"))?;
        if self.mc.n_grid.is_empty() {
            return Err(Error::config("mc.n_grid is empty"));
        }
        let schemes = self
            .mc
            .n_grid
            .iter()
            .map(|&n| self.scheme_for(n, (n as f64).powf(-rho)))
            .collect::<Result<Vec<_>>>()?;
        Ok(McPlan {
            model: self.model.clone(),
            schemes,
            reps: self.mc.reps,
            design: self.design()?,
            base_seed: self.seed,
        })
    }

    pub fn function(&self, c: FunctionChoice) -> TestFunction {
        match c {
            FunctionChoice::F1 => self.design.f1,
            FunctionChoice::F2 => self.design.f2,
        }
    }

    pub fn init(&self) -> Result<Option<ParamVector>> {
        match &self.solver.init {
            None => Ok(None),
            Some(c) => {
                let p = match self.design.method {
                    Method::Adaptive => ParamVector::adaptive(c.clone()),
                    Method::Threshold => ParamVector::threshold(c.clone()),
                };
                p.map(Some).map_err(|e| Error::config(format!("solver.init: {e}")))
            }
        }
    }

    pub fn rate_options(&self) -> RateOptions {
        RateOptions {
            slack: self.mc.slack,
            solve: self.solver.options,
            max_fail: self.mc.max_fail,
        }
    }
}

#[derive(Deserialize)]
struct Probe {
    schema_version: u32,
}

//! Limit regimes of the central limit theorem for `S_n(f)`.
//!
//! Under `Δ_n = n^{-ρ}` and `u_n = w_n Δ_n^{-H_1}` the rescaled increment
//! `λ u_n X_{l,n,γ}` is a multiscale moving average with coefficients
//! `a_{n,i} = |λ| u_n (γΔ_n)^{H_i} (2ã_i)^{1/2}` for the Gaussian components
//! (the standard deviation of the rescaled part) and
//! `b_{n,j} = |λ| u_n (γΔ_n)^{H_j} b̃_j^{1/β_j}` for the stable ones. Each is
//! a constant times `n^p (log n)^l`, so every limit statement reduces to a
//! comparison of rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::params::{spectral_scale, Method};
use crate::estimators::rates::Rate;
use crate::estimators::MomentDesign;
use crate::lfsm::ModelParams;
use crate::spectral::TestFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CltCase {
    I,
    Ii,
    Iii,
    Iv,
    V,
}

impl std::str::FromStr for CltCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "i" | "1" => Ok(CltCase::I),
            "ii" | "2" => Ok(CltCase::Ii),
            "iii" | "3" => Ok(CltCase::Iii),
            "iv" | "4" => Ok(CltCase::Iv),
            "v" | "5" => Ok(CltCase::V),
            _ => Err(Error::config(format!("unknown CLT case '{s}' (expected i, ii, iii, iv or v)"))),
        }
    }
}

/// Limit of a scaling sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Limit {
    /// No component of this type.
    Absent,
    Zero,
    Positive,
    Infinite,
}

fn limit_of(r: Option<Rate>) -> Limit {
    match r {
        None => Limit::Absent,
        Some(r) if r.vanishes() => Limit::Zero,
        Some(r) if r.diverges() => Limit::Infinite,
        Some(_) => Limit::Positive,
    }
}

fn is_null(l: Limit) -> bool {
    matches!(l, Limit::Absent | Limit::Zero)
}

/// One inequality of a regime, with its truth value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub text: String,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub case: CltCase,
    /// Dominant Gaussian and stable components (model indices).
    pub i_star: Option<usize>,
    pub j_star: Option<usize>,
    /// Rates of `a_{n,i*}` and `b_{n,j*}^{β_{j*}}`.
    pub a_rate: Option<Rate>,
    pub b_beta_rate: Option<Rate>,
    pub a_limit: Limit,
    pub b_limit: Limit,
    pub conditions: Vec<Condition>,
    pub holds: bool,
}

impl RegimeReport {
    pub fn explain(&self) -> String {
        let bad: Vec<&str> = self.conditions.iter().filter(|c| !c.holds).map(|c| c.text.as_str()).collect();
        if bad.is_empty() {
            format!("case ({:?}) regime holds", self.case).to_lowercase()
        } else {
            format!("case ({:?}) regime fails: {}", self.case, bad.join("; ")).to_lowercase()
        }
    }
}

struct Seq {
    comp: usize,
    rate: Rate,
    /// Constant `C` with `seq = C n^p (log n)^l`.
    constant: f64,
}

fn dominant(seqs: &[Seq], power: impl Fn(&Seq) -> Rate) -> (Option<usize>, bool) {
    if seqs.is_empty() {
        return (None, true);
    }
    let mut best = 0;
    for i in 1..seqs.len() {
        if power(&seqs[best]).is_o(&power(&seqs[i])) {
            best = i;
        }
    }
    let unique = seqs
        .iter()
        .enumerate()
        .all(|(i, s)| i == best || power(s).is_o(&power(&seqs[best])));
    (Some(best), unique)
}

fn pow(r: Rate, p: f64) -> Rate {
    Rate::new(r.power * p, r.log_power * p)
}

fn cond(out: &mut Vec<Condition>, text: impl Into<String>, holds: bool) {
    out.push(Condition {
        text: text.into(),
        holds,
    });
}

/// Numeric scaling coefficients at a given `u` and `Δ`: the Gaussian
/// `a_{n,i}` and the stable `(b_{n,j}, β_j)`.
pub fn scaling_coefficients(
    model: &ModelParams,
    k: usize,
    u: f64,
    delta: f64,
    tuple: (f64, usize),
) -> Result<(Vec<f64>, Vec<(f64, f64)>)> {
    let (lambda, gamma) = tuple;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for c in &model.components {
        let s = spectral_scale(c.b, c.hurst, c.beta, k)?;
        let base = lambda.abs() * u * (gamma as f64 * delta).powf(c.hurst);
        if c.beta == 2.0 {
            a.push(base * (2.0 * s).sqrt());
        } else {
            b.push((base * s.powf(1.0 / c.beta), c.beta));
        }
    }
    Ok((a, b))
}

/// `Σ_i a_{n,i}⁴ + Σ_j b_{n,j}^{β_j}`.
pub fn variance_scale(model: &ModelParams, k: usize, u: f64, delta: f64, tuple: (f64, usize)) -> Result<f64> {
    let (a, b) = scaling_coefficients(model, k, u, delta, tuple)?;
    Ok(a.iter().map(|x| x.powi(4)).sum::<f64>() + b.iter().map(|(x, beta)| x.powf(*beta)).sum::<f64>())
}

/// Evaluate the regime conditions of `case` for one tuple `(λ, γ)`.
///
/// `f` is the test function of the statistic; case (v) also needs the
/// smooth threshold `f2`. The exponential term of case (v) is
/// `exp(−η² / (2 Σ_i a_{n,i}²))` with the `a_{n,i}` above, which are
/// standard deviations, so no separate kernel bound enters.
#[allow(clippy::too_many_arguments)]
pub fn regime_conditions(
    model: &ModelParams,
    k: usize,
    rho: f64,
    design: &MomentDesign,
    tuple: (f64, usize),
    f: &TestFunction,
    f2: Option<&TestFunction>,
    case: CltCase,
) -> Result<RegimeReport> {
    model.validate()?;
    if !(rho > 0.0) {
        return Err(Error::config("ρ must be positive"));
    }
    let (lambda, gamma) = tuple;
    let h1 = model.min_hurst();
    // w_n: constant, or the schedule's (log n)^{-1/2}
    let (w_log, w0) = match design.method {
        Method::Adaptive => (0.0, 1.0),
        Method::Threshold => match design.w_params.w {
            Some(w) => (0.0, w),
            None => {
                let p = design.w_params;
                (-0.5, p.c0.min(p.eta / (9.0 * p.sigma)) / rho.sqrt())
            }
        },
    };
    let mut gauss = Vec::new();
    let mut stable = Vec::new();
    for (j, c) in model.components.iter().enumerate() {
        let s = spectral_scale(c.b, c.hurst, c.beta, k)?;
        let rate = Rate::new(-rho * (c.hurst - h1), w_log);
        let base = lambda.abs() * w0 * (gamma as f64).powf(c.hurst);
        if c.beta == 2.0 {
            gauss.push(Seq {
                comp: j,
                rate,
                constant: base * (2.0 * s).sqrt(),
            });
        } else {
            let beta = c.beta;
            stable.push((
                Seq {
                    comp: j,
                    rate,
                    constant: base * s.powf(1.0 / beta),
                },
                beta,
            ));
        }
    }
    let mut conditions = Vec::new();
    let (ia, ua) = dominant(&gauss, |s| pow(s.rate, 2.0));
    let stable_seqs: Vec<Seq> = stable
        .iter()
        .map(|(s, b)| Seq {
            comp: s.comp,
            rate: pow(s.rate, *b),
            constant: s.constant.powf(*b),
        })
        .collect();
    let (jb, ub) = dominant(&stable_seqs, |s| s.rate);
    cond(&mut conditions, "a unique dominant Gaussian component (a_{n,i*}² ≫ a_{n,i}²)", ua);
    cond(&mut conditions, "a unique dominant stable component (b_{n,j*}^β ≫ b_{n,j}^β)", ub);
    let a_rate = ia.map(|i| gauss[i].rate);
    let b_beta = jb.map(|j| stable_seqs[j].rate);
    let b_rate = jb.map(|j| stable[j].0.rate);
    let a_limit = limit_of(a_rate);
    let b_limit = limit_of(b_rate);
    cond(&mut conditions, "a_{n,i*} bounded", a_limit != Limit::Infinite);
    cond(&mut conditions, "b_{n,j*} bounded", b_limit != Limit::Infinite);
    let one_n = Rate::new(1.0, 0.0);
    let a4 = a_rate.map(|r| pow(r, 4.0));
    let zero = Rate::new(0.0, 0.0);
    let n_times_diverges = |r: Option<Rate>| r.is_some_and(|r| zero.is_o(&one_n.times(r)));
    let d2 = f.second_derivative_at_zero();
    match case {
        CltCase::I => {
            cond(&mut conditions, "a > 0", a_limit == Limit::Positive);
            cond(&mut conditions, "b = 0", is_null(b_limit));
        }
        CltCase::Ii => {
            cond(&mut conditions, "a = 0", is_null(a_limit));
            cond(&mut conditions, "b > 0", b_limit == Limit::Positive);
        }
        CltCase::Iii => {
            cond(&mut conditions, "a = b = 0", is_null(a_limit) && is_null(b_limit));
            let ok = match (a4, b_beta) {
                (None, Some(_)) => true,
                (Some(a), Some(b)) => a.is_o(&b),
                _ => false,
            };
            cond(&mut conditions, "a_{n,i*}⁴ ≪ b_{n,j*}^β", ok);
            cond(&mut conditions, "n b_{n,j*}^β → ∞", n_times_diverges(b_beta));
        }
        CltCase::Iv => {
            cond(&mut conditions, "a = b = 0", is_null(a_limit) && is_null(b_limit));
            let ok = match (a4, b_beta) {
                (Some(_), None) => true,
                (Some(a), Some(b)) => b.is_o(&a),
                _ => false,
            };
            cond(&mut conditions, "a_{n,i*}⁴ ≫ b_{n,j*}^β", ok);
            cond(&mut conditions, "n a_{n,i*}⁴ → ∞", n_times_diverges(a4));
            cond(&mut conditions, "D²f(0) ≠ 0", d2 != 0.0);
        }
        CltCase::V => {
            cond(&mut conditions, "a = b = 0", is_null(a_limit) && is_null(b_limit));
            cond(&mut conditions, "n a_{n,i*}⁴ → ∞", n_times_diverges(a4));
            cond(&mut conditions, "n b_{n,j*}^β → ∞", n_times_diverges(b_beta));
            cond(&mut conditions, "D²f₁(0) ≠ 0", d2 != 0.0);
            let eta = f2.map_or(0.0, |g| g.zero_radius());
            cond(&mut conditions, "f₂ vanishes on a neighbourhood of 0", eta > 0.0);
            let ok_ab = match (a4, b_beta) {
                (Some(a), Some(b)) => b.is_o(&a),
                _ => false,
            };
            cond(&mut conditions, "b_{n,j*}^β ≪ a_{n,i*}⁴", ok_ab);
            let ok_exp = match (ia, b_beta) {
                (Some(i), Some(b)) => {
                    let a = &gauss[i];
                    if a.rate.power < -1e-12 {
                        // exp(−c n^{2|p|}) is below every rate
                        true
                    } else if a.rate.power.abs() <= 1e-12 && a.rate.log_power < -1e-12 {
                        // Σ a² ≈ C²/log n gives exp(−η² log n / (2C²)) = n^{−η²/(2C²)}
                        let e = Rate::new(-eta * eta / (2.0 * a.constant * a.constant), 0.0);
                        e.is_o(&b)
                    } else {
                        false
                    }
                }
                _ => false,
            };
            cond(&mut conditions, "exp(−η²/(2 Σ a_{n,i}²)) ≪ b_{n,j*}^β", ok_exp);
        }
    }
    let holds = conditions.iter().all(|c| c.holds);
    Ok(RegimeReport {
        case,
        i_star: ia.map(|i| gauss[i].comp),
        j_star: jb.map(|j| stable_seqs[j].comp),
        a_rate,
        b_beta_rate: b_beta,
        a_limit,
        b_limit,
        conditions,
        holds,
    })
}

/// As [`regime_conditions`], but a failing regime is a configuration error
/// naming the violated inequalities.
#[allow(clippy::too_many_arguments)]
pub fn validate_regime(
    model: &ModelParams,
    k: usize,
    rho: f64,
    design: &MomentDesign,
    tuple: (f64, usize),
    f: &TestFunction,
    f2: Option<&TestFunction>,
    case: CltCase,
) -> Result<RegimeReport> {
    let r = regime_conditions(model, k, rho, design, tuple, f, f2, case)?;
    if r.holds {
        Ok(r)
    } else {
        Err(Error::Config(r.explain()))
    }
}

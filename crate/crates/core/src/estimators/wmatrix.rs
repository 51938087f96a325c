//! Jacobian-limit matrices and the regularity determinants of the fixed designs.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::design::{MomentTuple, RegularityCase};
use super::params::{Method, ParamVector};
use crate::error::{Error, Result};
use crate::spectral::fourier::FourierTable;

/// How the `β_j` column is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WForm {
    /// Literal `∂_θ` of the power sum: `β_j` column carries `H_j log γ + log|λv|`.
    Literal,
    /// Limit of the standardized Jacobian: `β_j` column carries `log|λv|`.
    /// Differs from `Literal` by an invertible column operation.
    Limit,
}

/// Moments `∫ f̂(v) e(v) |λv|^{β} (1, log|λv|) dv` for each β, with a
/// common damping `e(v)`.
fn weighted_moments<E: Fn(f64) -> f64>(table: &FourierTable, lambda: f64, betas: &[f64], damp: E) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); betas.len()];
    let la = lambda.abs();
    if la == 0.0 {
        return out;
    }
    let ll = la.ln();
    for i in 1..table.wts.len() {
        let lv = table.ln_v[i] + ll;
        let e = damp(lv);
        if e == 0.0 {
            break;
        }
        let we = table.wts[i] * e;
        for (k, b) in betas.iter().enumerate() {
            let p = (b * lv).exp();
            out[k].0 += we * p;
            out[k].1 += we * p * lv;
        }
    }
    out
}

/// `W̄(θ)` with rows indexed by tuples and columns by coordinates.
pub fn w_bar(theta: &ParamVector, tuples: &[MomentTuple], table: &FourierTable, form: WForm) -> Result<DMatrix<f64>> {
    if theta.method != Method::Adaptive {
        return Err(Error::param("W̄ needs an adaptive parameter vector"));
    }
    let comps = theta.components();
    let d = theta.dim();
    let betas: Vec<f64> = comps.iter().map(|c| c.beta).collect();
    let mut w = DMatrix::zeros(tuples.len(), d);
    let c1 = comps[0];
    for (r, t) in tuples.iter().enumerate() {
        let g = t.gamma as f64;
        let lg = g.ln();
        let a1 = c1.scale * g.powf(c1.beta * c1.hurst);
        // exp(-b̃_1 γ^{β_1 H_1} |λv|^{β_1}) with ln|λv| given
        let m = weighted_moments(table, t.lambda, &betas, |lv| {
            let p = a1 * (c1.beta * lv).exp();
            if p > 745.0 {
                0.0
            } else {
                (-p).exp()
            }
        });
        for (j, c) in comps.iter().enumerate() {
            let gp = g.powf(c.beta * c.hurst);
            let (m0, m1) = m[j];
            w[(r, 3 * j)] = gp * m0;
            w[(r, 3 * j + 1)] = c.scale * c.beta * lg * gp * m0;
            w[(r, 3 * j + 2)] = match form {
                WForm::Literal => c.scale * gp * (c.hurst * lg * m0 + m1),
                WForm::Limit => c.scale * gp * m1,
            };
        }
    }
    Ok(w)
}

/// Block-diagonal `W̲(θ)`: the closed-form Gaussian block on `f1` and the
/// stable block on `f2`.
pub fn w_underline(
    theta: &ParamVector,
    tuples: &[MomentTuple],
    f1_second_derivative: f64,
    table2: &FourierTable,
    form: WForm,
) -> Result<DMatrix<f64>> {
    if theta.method != Method::Threshold || tuples.len() != 10 {
        return Err(Error::param("W̲ needs a threshold parameter vector and 10 tuples"));
    }
    let c = theta.components();
    let mut w = DMatrix::zeros(10, 10);
    for (r, t) in tuples[..4].iter().enumerate() {
        let g = t.gamma as f64;
        let l2 = t.lambda * t.lambda * f1_second_derivative;
        for j in 0..2 {
            let gp = g.powf(2.0 * c[j].hurst);
            w[(r, 2 * j)] = l2 * gp;
            w[(r, 2 * j + 1)] = l2 * c[j].scale * 2.0 * g.ln() * gp;
        }
    }
    let betas = [c[2].beta, c[3].beta];
    for (r, t) in tuples[4..].iter().enumerate() {
        let g = t.gamma as f64;
        let lg = g.ln();
        let m = weighted_moments(table2, t.lambda, &betas, |_| 1.0);
        for j in 0..2 {
            let s = &c[2 + j];
            let gp = g.powf(s.beta * s.hurst);
            let (m0, m1) = m[j];
            let col = 4 + 3 * j;
            w[(4 + r, col)] = gp * m0;
            w[(4 + r, col + 1)] = s.scale * s.beta * lg * gp * m0;
            w[(4 + r, col + 2)] = match form {
                WForm::Literal => s.scale * gp * (s.hurst * lg * m0 + m1),
                WForm::Limit => s.scale * gp * m1,
            };
        }
    }
    Ok(w)
}

/// Numeric determinant of the reduced matrix next to the closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeterminantPair {
    pub numeric: f64,
    pub closed_form: f64,
    /// `det / Π ‖row‖`, a scale-free regularity measure in `[0, 1]`.
    pub normalized: f64,
}

/// Reduced matrix of a fixed design: rows `(γ^{2H_1}, γ^{2H_1} log₂γ, γ^{2H_2}, γ^{2H_2} log₂γ)`
/// for case (i) and `γ^{β_j H̄_j} |λ|^{β_j} (1, log₂γ, log₂|λ|)`, `j = 1, 2`, otherwise.
pub fn reduced_matrix(theta: &ParamVector, case: RegularityCase) -> Result<DMatrix<f64>> {
    if theta.method != Method::Threshold {
        return Err(Error::Unsupported("regularity determinants need a threshold parameter vector".into()));
    }
    let c = theta.components();
    let tuples = case.tuples();
    let mut m = DMatrix::zeros(tuples.len(), tuples.len());
    for (r, (lambda, gamma)) in tuples.iter().enumerate() {
        let g = *gamma as f64;
        let lg = g.log2();
        match case {
            RegularityCase::I => {
                for j in 0..2 {
                    let p = g.powf(2.0 * c[j].hurst);
                    m[(r, 2 * j)] = p;
                    m[(r, 2 * j + 1)] = p * lg;
                }
            }
            _ => {
                for j in 0..2 {
                    let s = &c[2 + j];
                    let p = g.powf(s.beta * s.hurst) * lambda.abs().powf(s.beta);
                    m[(r, 3 * j)] = p;
                    m[(r, 3 * j + 1)] = p * lg;
                    m[(r, 3 * j + 2)] = p * lambda.abs().log2();
                }
            }
        }
    }
    Ok(m)
}

pub fn closed_form_determinant(theta: &ParamVector, case: RegularityCase) -> Result<f64> {
    let c = theta.components();
    let p = |x: f64| 2f64.powf(x);
    Ok(match case {
        RegularityCase::I => {
            let (h1, h2) = (c[0].hurst, c[1].hurst);
            p(2.0 * h1 + 2.0 * h2) * (p(h1) - p(h2)).powi(4) * (p(h1) + p(h2)).powi(4)
        }
        RegularityCase::Ii => {
            let (h1, b1, h2, b2) = (c[2].hurst, c[2].beta, c[3].hurst, c[3].beta);
            p(3.0 * b1 + 3.0 * b2 + 2.0 * h1 * b1 + 2.0 * h2 * b2)
                * (p(b1 + h1 * b1) - p(b2 + h2 * b2))
                * (p(2.0 * b1 + h1 * b1) - p(2.0 * b2 + h2 * b2)).powi(4)
        }
        RegularityCase::Iii => {
            let (h1, b1, h2, b2) = (c[2].hurst, c[2].beta, c[3].hurst, c[3].beta);
            -p(b1 + b2 + 2.0 * h1 * b1 + 2.0 * h2 * b2) * (p(h1 * b1) - p(h2 * b2)).powi(5) * (p(h1 * b1) + p(h2 * b2))
        }
    })
}

pub fn regularity_determinants(theta: &ParamVector, case: RegularityCase) -> Result<DeterminantPair> {
    let m = reduced_matrix(theta, case)?;
    let numeric = m.clone().determinant();
    let rows: f64 = m.row_iter().map(|r| r.norm()).product();
    Ok(DeterminantPair {
        numeric,
        closed_form: closed_form_determinant(theta, case)?,
        normalized: if rows > 0.0 { numeric / rows } else { 0.0 },
    })
}

/// Condition number `σ_max / σ_min`; infinite when singular.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::design::{default_f1, default_f2, MomentDesign, WParams};
    use crate::estimators::equations::EstimatingEquation;
    use crate::estimators::rates::{adaptive_scaling, threshold_scaling};
    use crate::lfsm::IncrementPanel;
    use crate::quad::gl16_composite;
    use crate::stable::levy_constant;
    use crate::spectral::testfn::TestFunction;

    fn theta_t(h1: f64, h2: f64, hb1: f64, b1: f64, hb2: f64, b2: f64) -> ParamVector {
        ParamVector::raw(Method::Threshold, vec![1.0, h1, 0.5, h2, 0.7, hb1, b1, 0.4, hb2, b2])
    }

    #[test]
    fn b_column_vanishes_at_zero_lambda() {
        let t = FourierTable::cached(&default_f1()).unwrap();
        let th = ParamVector::adaptive(vec![1.0, 0.6, 1.5]).unwrap();
        let tuples = [MomentTuple::new(0.0, 1, 0), MomentTuple::new(1.0, 2, 0), MomentTuple::new(2.0, 2, 0)];
        let w = w_bar(&th, &tuples, &t, WForm::Literal).unwrap();
        assert_eq!(w[(0, 0)], 0.0);
        assert!(w[(1, 0)] > 0.0);
    }

    #[test]
    fn gaussian_closed_form_entries() {
        let t = FourierTable::cached(&default_f1()).unwrap();
        let (b, h) = (0.8, 0.35);
        let th = ParamVector::adaptive(vec![b, h, 2.0]).unwrap();
        let tuples = [MomentTuple::new(1.0, 1, 0), MomentTuple::new(1.0, 2, 0), MomentTuple::new(2.0, 2, 0)];
        let w = w_bar(&th, &tuples, &t, WForm::Literal).unwrap();
        for (r, tp) in tuples.iter().enumerate() {
            let g = tp.gamma as f64;
            let l2 = tp.lambda * tp.lambda;
            let c = b * l2 * g.powf(2.0 * h);
            // ∫ f̂(v) v² e^{-c v²} dv = (1 + 2c)^{-3/2} for f = exp(-x²/2)
            let ex = l2 * g.powf(2.0 * h) * (1.0 + 2.0 * c).powf(-1.5);
            assert!((w[(r, 0)] - ex).abs() < 1e-9, "{r}: {} {ex}", w[(r, 0)]);
            assert!((w[(r, 1)] - b * 2.0 * g.ln() * ex).abs() < 1e-9);
        }
    }

    /// `B D E C_n → −W` as `Δ → 0`, with monotone decrease over a Δ grid.
    #[test]
    fn adaptive_jacobian_limit() {
        let th = ParamVector::adaptive(vec![1.0, 0.3, 1.8, 0.6, 0.7, 1.5]).unwrap();
        let design = MomentDesign::default_adaptive(2, default_f1());
        let table = FourierTable::cached(&default_f1()).unwrap();
        let w = w_bar(&th, &design.tuples, &table, WForm::Limit).unwrap();
        let mut prev = f64::INFINITY;
        for e in 8..=14 {
            let delta = 2f64.powi(-e);
            let panel = IncrementPanel {
                k: 2,
                gammas: design.gammas(),
                delta,
                first_l: 1,
                columns: vec![vec![1.0]; design.gammas().len()],
            };
            let eq = EstimatingEquation::new(panel, design.clone()).unwrap();
            let de = eq.expectation_jacobian(&th).unwrap();
            let c = adaptive_scaling(&th, delta).unwrap();
            let err = (&de * &c + &w).norm();
            assert!(err < prev, "Δ = 2^-{e}: {err} ≥ {prev}");
            prev = err;
        }
        assert!(prev < 0.1 * w.norm());
    }

    #[test]
    fn stable_moment_oracle() {
        // ∫ f̂(v) |v|^β dv = −c_β ∫ f(x) |x|^{−1−β} dx when f vanishes near 0;
        // the trapezoid rule carries an O(h^{1+β}) error from the origin
        let f = default_f2();
        let t = FourierTable::cached(&f).unwrap();
        for &b in &[0.8, 1.2, 1.7] {
            let m = weighted_moments(&t, 1.0, &[b], |_| 1.0)[0].0;
            let rhs = -2.0 * levy_constant(b) * gl16_composite(&|x: f64| f.eval(x) * x.powf(-1.0 - b), 1.0, 30.0, 400);
            assert!((m - rhs).abs() < 1e-5 * rhs.abs(), "{b}: {m} {rhs}");
        }
    }

    #[test]
    fn w_underline_structure() {
        let th = ParamVector::threshold(vec![1.0, 0.3, 0.5, 0.5, 0.5, 0.6, 1.2, 0.5, 0.8, 1.5]).unwrap();
        let d = MomentDesign::default_threshold(default_f1(), default_f2(), WParams::default());
        let t2 = FourierTable::cached(&default_f2()).unwrap();
        let w = w_underline(&th, &d.tuples, -1.0, &t2, WForm::Literal).unwrap();
        for r in 0..4 {
            for i in 4..10 {
                assert_eq!(w[(r, i)], 0.0);
                assert_eq!(w[(i, r)], 0.0);
            }
        }
        // λ = 1, γ = 1 row: (−1, 0, −1, 0)
        assert_eq!(w[(0, 0)], -1.0);
        assert_eq!(w[(0, 1)], 0.0);
        assert_eq!(w[(0, 2)], -1.0);
        assert_eq!(w[(0, 3)], 0.0);
    }

    /// `B D E C_n` on the stable block approaches `−W̲₂` as `Δ → 0`.
    #[test]
    fn threshold_stable_block_limit() {
        let th = ParamVector::threshold(vec![1.0, 0.3, 0.5, 0.5, 0.5, 0.45, 1.2, 0.5, 0.6, 1.5]).unwrap();
        let f2 = TestFunction::threshold(1.0, 0.5, 0.25);
        let d = MomentDesign::default_threshold(default_f1(), f2, WParams::default());
        let t2 = FourierTable::cached(&f2).unwrap();
        let w = w_underline(&th, &d.tuples, -1.0, &t2, WForm::Limit).unwrap();
        let target = w.view((4, 4), (6, 6)).into_owned();
        let mut prev = f64::INFINITY;
        for e in [20, 60, 200, 600] {
            let delta = 2f64.powi(-e);
            let panel = IncrementPanel {
                k: 2,
                gammas: d.gammas(),
                delta,
                first_l: 1,
                columns: vec![vec![1.0]; 4],
            };
            let eq = EstimatingEquation::new(panel, d.clone()).unwrap();
            let de = eq.expectation_jacobian(&th).unwrap();
            let (b, c) = threshold_scaling(&th, delta, eq.w()).unwrap();
            let s = nalgebra::DMatrix::from_diagonal(&b) * de * c;
            let blk = s.view((4, 4), (6, 6)).into_owned();
            let err = (&blk + &target).norm() / target.norm();
            assert!(err < prev, "2^-{e}: {err}");
            prev = err;
        }
        assert!(prev < 0.05, "{prev}");
    }

    #[test]
    fn determinant_examples() {
        let th = theta_t(0.25, 0.5, 0.6, 1.2, 0.8, 1.5);
        let d = regularity_determinants(&th, RegularityCase::I).unwrap();
        assert!(((d.numeric - d.closed_form) / d.closed_form).abs() < 1e-8, "{d:?}");
        let eq = theta_t(0.4, 0.4, 0.6, 1.2, 0.8, 1.5);
        assert_eq!(closed_form_determinant(&eq, RegularityCase::I).unwrap(), 0.0);
        assert!(regularity_determinants(&eq, RegularityCase::I).unwrap().normalized.abs() < 1e-8);
        // H̄_1 β_1 = H̄_2 β_2
        let s = theta_t(0.3, 0.5, 0.75, 1.2, 0.6, 1.5);
        let d3 = regularity_determinants(&s, RegularityCase::Iii).unwrap();
        assert!(d3.closed_form.abs() < 1e-12 && d3.normalized.abs() < 1e-8, "{d3:?}");
        for case in [RegularityCase::Ii, RegularityCase::Iii] {
            let d = regularity_determinants(&th, case).unwrap();
            assert!(((d.numeric - d.closed_form) / d.closed_form).abs() < 1e-8, "{case:?} {d:?}");
        }
    }
}

//! The estimating equations `G_n` (adaptive) and `H_n` (threshold).

use std::sync::Arc;

use nalgebra::DMatrix;

use super::design::{MomentDesign, MomentTuple};
use super::params::{Kind, Method, ParamVector};
use crate::error::{Error, Result};
use crate::lfsm::IncrementPanel;
use crate::spectral::fourier::FourierTable;
use crate::spectral::moments::{model_expectation, model_expectation_grad, Rescale};
use crate::spectral::testfn::TestFunction;
use crate::stats::pairwise_sum;

/// Scale `u·|λ|·max|X|` below which every moment collapses to `f(0)`.
pub const DEGENERATE_SCALE: f64 = 1e-8;

fn column<'a>(panel: &'a IncrementPanel, gamma: usize) -> Result<&'a [f64]> {
    panel
        .column_for(gamma)
        .ok_or_else(|| Error::input(format!("increment panel has no lag γ = {gamma}")))
}

fn mean_of<F: Fn(f64) -> f64>(col: &[f64], g: F) -> f64 {
    if col.is_empty() {
        return f64::NAN;
    }
    let v: Vec<f64> = col.iter().map(|&x| g(x)).collect();
    pairwise_sum(&v) / col.len() as f64
}

/// `[ (1/n) Σ_l f(u λ_r X_{l,n,γ_r}) ]_r`.
pub fn statistic_s(panel: &IncrementPanel, f: &TestFunction, u: f64, tuples: &[(f64, usize)]) -> Result<Vec<f64>> {
    tuples
        .iter()
        .map(|&(lambda, gamma)| {
            let col = column(panel, gamma)?;
            let s = u * lambda;
            Ok(mean_of(col, |x| f.eval(s * x)))
        })
        .collect()
}

/// An estimating equation bound to a panel and a design.
#[derive(Debug, Clone)]
pub struct EstimatingEquation {
    pub panel: IncrementPanel,
    pub design: MomentDesign,
    tables: Vec<Arc<FourierTable>>,
    w: f64,
    max_abs: Vec<f64>,
}

impl EstimatingEquation {
    pub fn new(panel: IncrementPanel, design: MomentDesign) -> Result<Self> {
        let dim = design.dim();
        design.validate(dim)?;
        for t in &design.tuples {
            column(&panel, t.gamma)?;
        }
        if panel.rows() == 0 {
            return Err(Error::input("increment panel is empty"));
        }
        let tables = design
            .functions
            .iter()
            .map(FourierTable::cached)
            .collect::<Result<Vec<_>>>()?;
        let w = design.w(panel.delta)?;
        let max_abs = design
            .tuples
            .iter()
            .map(|t| {
                column(&panel, t.gamma)
                    .map(|c| c.iter().fold(0.0f64, |m, x| m.max(x.abs())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            panel,
            design,
            tables,
            w,
            max_abs,
        })
    }

    pub fn method(&self) -> Method {
        self.design.method
    }

    pub fn dim(&self) -> usize {
        self.design.dim()
    }

    pub fn delta(&self) -> f64 {
        self.panel.delta
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn tables(&self) -> &[Arc<FourierTable>] {
        &self.tables
    }

    fn check_theta(&self, theta: &ParamVector) -> Result<()> {
        if theta.method != self.design.method || theta.dim() != self.dim() {
            return Err(Error::param("parameter vector does not match the design"));
        }
        Ok(())
    }

    /// `u_n(θ) = w_n Δ^{-H_1}`.
    pub fn u(&self, theta: &ParamVector) -> Result<f64> {
        let u = self.w * self.delta().powf(-theta.h1());
        if !u.is_finite() || u <= 0.0 {
            return Err(Error::numerical(format!("rescaling factor u = {u} is not finite"), u));
        }
        Ok(u)
    }

    fn guard(&self, u: f64) -> Result<()> {
        let top = self
            .design
            .tuples
            .iter()
            .zip(&self.max_abs)
            .map(|(t, m)| u * t.lambda.abs() * m)
            .fold(0.0, f64::max);
        if top < DEGENERATE_SCALE {
            return Err(Error::Degenerate(format!(
                "rescaled increments are below {DEGENERATE_SCALE:e}; every moment equals f(0)"
            )));
        }
        Ok(())
    }

    fn rescale(&self) -> Rescale {
        Rescale::Adaptive { w: self.w, dominant: 0 }
    }

    fn tuple_fn(&self, t: &MomentTuple) -> (&TestFunction, &FourierTable) {
        (&self.design.functions[t.function], &self.tables[t.function])
    }

    /// Empirical part `S_n(θ)`.
    pub fn statistic(&self, theta: &ParamVector) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        let u = self.u(theta)?;
        self.guard(u)?;
        self.design
            .tuples
            .iter()
            .map(|t| {
                let (f, _) = self.tuple_fn(t);
                let s = u * t.lambda;
                Ok(mean_of(column(&self.panel, t.gamma)?, |x| f.eval(s * x)))
            })
            .collect()
    }

    /// Model part `E_θ S_n(θ)`.
    pub fn expectation(&self, theta: &ParamVector) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        let comps = theta.components();
        self.design
            .tuples
            .iter()
            .map(|t| {
                let (_, tab) = self.tuple_fn(t);
                model_expectation(tab, &comps, t.lambda, t.gamma as f64, self.delta(), self.rescale())
            })
            .collect()
    }

    /// `F(θ) = S_n(θ) − E_θ S_n(θ)`.
    pub fn eval(&self, theta: &ParamVector) -> Result<Vec<f64>> {
        let s = self.statistic(theta)?;
        let e = self.expectation(theta)?;
        Ok(s.iter().zip(&e).map(|(a, b)| a - b).collect())
    }

    /// Jacobian of the model part alone.
    pub fn expectation_jacobian(&self, theta: &ParamVector) -> Result<DMatrix<f64>> {
        self.check_theta(theta)?;
        let comps = theta.components();
        let layout = theta.layout();
        let mut jac = DMatrix::zeros(self.dim(), theta.dim());
        for (r, t) in self.design.tuples.iter().enumerate() {
            let (_, tab) = self.tuple_fn(t);
            let g = model_expectation_grad(tab, &comps, t.lambda, t.gamma as f64, self.delta(), self.rescale())?;
            for (i, (j, k)) in layout.iter().enumerate() {
                jac[(r, i)] = g.grad[*j][kind_index(*k)];
            }
        }
        Ok(jac)
    }

    /// `F(θ)` together with its exact Jacobian.
    pub fn eval_jacobian(&self, theta: &ParamVector) -> Result<(Vec<f64>, DMatrix<f64>)> {
        self.check_theta(theta)?;
        let u = self.u(theta)?;
        self.guard(u)?;
        let comps = theta.components();
        let layout = theta.layout();
        let ln_delta = self.delta().ln();
        let h1 = theta.h1_index();
        let mut f_val = Vec::with_capacity(self.dim());
        let mut jac = DMatrix::zeros(self.dim(), theta.dim());
        for (r, t) in self.design.tuples.iter().enumerate() {
            let (f, tab) = self.tuple_fn(t);
            let col = column(&self.panel, t.gamma)?;
            let s = u * t.lambda;
            let stat = mean_of(col, |x| f.eval(s * x));
            let phi = mean_of(col, |x| f.x_deriv(s * x));
            let g = model_expectation_grad(tab, &comps, t.lambda, t.gamma as f64, self.delta(), self.rescale())?;
            f_val.push(stat - g.value);
            for (i, (j, k)) in layout.iter().enumerate() {
                jac[(r, i)] = -g.grad[*j][kind_index(*k)];
            }
            // d/dH_1 f(u λ x) = -ln Δ · φ(u λ x)
            jac[(r, h1)] += -ln_delta * phi;
        }
        Ok((f_val, jac))
    }
}

fn kind_index(k: Kind) -> usize {
    match k {
        Kind::Scale => 0,
        Kind::Hurst => 1,
        Kind::Beta => 2,
    }
}

/// Adaptive estimating equation evaluated once.
pub fn g_n(theta: &ParamVector, panel: &IncrementPanel, design: &MomentDesign) -> Result<Vec<f64>> {
    if design.method != Method::Adaptive {
        return Err(Error::param("G_n needs an adaptive design"));
    }
    EstimatingEquation::new(panel.clone(), design.clone())?.eval(theta)
}

/// Threshold estimating equation evaluated once.
pub fn h_n(theta: &ParamVector, panel: &IncrementPanel, design: &MomentDesign) -> Result<Vec<f64>> {
    if design.method != Method::Threshold {
        return Err(Error::param("H_n needs a threshold design"));
    }
    EstimatingEquation::new(panel.clone(), design.clone())?.eval(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::design::{default_f1, default_f2, WParams};

    fn panel(cols: Vec<Vec<f64>>, gammas: Vec<usize>, delta: f64) -> IncrementPanel {
        IncrementPanel {
            k: 1,
            gammas,
            delta,
            first_l: 1,
            columns: cols,
        }
    }

    #[test]
    fn statistic_trivial_cases() {
        let p = panel(vec![vec![0.0; 5]], vec![1], 0.01);
        let s = statistic_s(&p, &default_f1(), 3.0, &[(1.0, 1), (2.0, 1)]).unwrap();
        assert_eq!(s, vec![1.0, 1.0]);
        let p = panel(vec![vec![0.5, -1.0, 2.0, 3.0, -0.1]], vec![1], 0.01);
        let s = statistic_s(&p, &default_f2(), 0.0, &[(1.0, 1)]).unwrap();
        assert_eq!(s, vec![0.0]);
        assert!(matches!(statistic_s(&p, &default_f1(), 1.0, &[(1.0, 2)]), Err(Error::Input(_))));
    }

    #[test]
    fn statistic_toy_panel() {
        let xs = vec![0.0, 1.0, -1.0, 2.0, 0.5];
        let p = panel(vec![xs.clone()], vec![1], 0.01);
        let s = statistic_s(&p, &default_f1(), 1.0, &[(1.0, 1)]).unwrap();
        let hand = (1.0 + 2.0 * (-0.5f64).exp() + (-2.0f64).exp() + (-0.125f64).exp()) / 5.0;
        assert!((s[0] - hand).abs() < 1e-15);
    }

    #[test]
    fn degenerate_rescaling_is_guarded() {
        let p = panel(vec![vec![0.1, -0.2, 0.3]; 3], vec![1, 2, 4], 0.01);
        let design = MomentDesign::default_adaptive(1, default_f1());
        let eq = EstimatingEquation::new(p, design).unwrap();
        let th = ParamVector::raw(Method::Adaptive, vec![1.0, -8.0, 1.5]);
        assert!(matches!(eq.eval(&th), Err(Error::Degenerate(_))));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let xs: Vec<f64> = (0..200).map(|i| ((i as f64) * 0.37).sin() * 0.05).collect();
        let p = panel(vec![xs.clone(), xs.iter().map(|x| 1.3 * x).collect(), xs.iter().map(|x| 1.7 * x).collect()], vec![1, 2, 4], 1e-3);
        let design = MomentDesign::default_adaptive(1, default_f1());
        let eq = EstimatingEquation::new(p, design).unwrap();
        let th = ParamVector::adaptive(vec![0.8, 0.6, 1.4]).unwrap();
        let (f0, j) = eq.eval_jacobian(&th).unwrap();
        assert_eq!(f0, eq.eval(&th).unwrap());
        for i in 0..3 {
            let h = 1e-6;
            let mut up = th.clone();
            let mut dn = th.clone();
            up.coords[i] += h;
            dn.coords[i] -= h;
            let fu = eq.eval(&up).unwrap();
            let fd = eq.eval(&dn).unwrap();
            for r in 0..3 {
                let d = (fu[r] - fd[r]) / (2.0 * h);
                assert!((d - j[(r, i)]).abs() < 1e-6 * (1.0 + d.abs()), "{r},{i}: {d} {}", j[(r, i)]);
            }
        }
    }

    #[test]
    fn threshold_blocks() {
        let xs: Vec<f64> = (0..300).map(|i| ((i as f64) * 0.71).sin() * 0.02).collect();
        let cols = vec![xs.clone(); 4];
        let p = panel(cols, vec![1, 2, 4, 8], 1e-3);
        let design = MomentDesign::default_threshold(default_f1(), default_f2(), WParams::default());
        let eq = EstimatingEquation::new(p, design).unwrap();
        let th = ParamVector::threshold(vec![1.0, 0.3, 0.5, 0.5, 0.5, 0.6, 1.2, 0.5, 0.8, 1.5]).unwrap();
        let f_a = eq.eval(&th).unwrap();
        let mut d2 = eq.design.clone();
        d2.functions[1] = crate::spectral::testfn::TestFunction::threshold(1.5, 0.3, 0.5);
        let eq2 = EstimatingEquation::new(eq.panel.clone(), d2).unwrap();
        let f_b = eq2.eval(&th).unwrap();
        assert_eq!(f_a[..4], f_b[..4]);
        assert!(f_a[4..].iter().zip(&f_b[4..]).any(|(a, b)| a != b));
        let s = eq.statistic(&th).unwrap();
        assert_eq!(s.len(), 10);
        assert!(s[4..].iter().all(|v| *v == 0.0));
    }
}

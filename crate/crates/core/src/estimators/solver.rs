//! Contraction iteration for estimating equations with a damped Newton fallback.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::equations::EstimatingEquation;
use super::params::{Method, ParamVector};
use super::rates::{adaptive_scaling, threshold_scaling};
use super::wmatrix::condition_number;
use crate::error::{Error, Result};

/// A moment function `F(θ)` with optional analytic Jacobian and row/column
/// standardizations `(B, C)`.
pub trait MomentFunction {
    fn eval(&self, theta: &ParamVector) -> Result<Vec<f64>>;

    fn eval_jacobian(&self, _theta: &ParamVector) -> Result<Option<(Vec<f64>, DMatrix<f64>)>> {
        Ok(None)
    }

    /// Diagonal of `B` and the matrix `C`; identities by default.
    fn scaling(&self, theta: &ParamVector) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let d = theta.dim();
        Ok((DVector::from_element(d, 1.0), DMatrix::identity(d, d)))
    }
}

impl MomentFunction for EstimatingEquation {
    fn eval(&self, theta: &ParamVector) -> Result<Vec<f64>> {
        EstimatingEquation::eval(self, theta)
    }

    fn eval_jacobian(&self, theta: &ParamVector) -> Result<Option<(Vec<f64>, DMatrix<f64>)>> {
        EstimatingEquation::eval_jacobian(self, theta).map(Some)
    }

    fn scaling(&self, theta: &ParamVector) -> Result<(DVector<f64>, DMatrix<f64>)> {
        match self.method() {
            Method::Adaptive => {
                let c = adaptive_scaling(theta, self.delta())?;
                Ok((DVector::from_element(theta.dim(), 1.0), c))
            }
            Method::Threshold => threshold_scaling(theta, self.delta(), self.w()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveOptions {
    /// Bound on `‖B F(θ)‖_∞` at convergence.
    pub tol: f64,
    pub max_iter: usize,
    /// Contraction ratio above which the frozen matrix is refreshed.
    pub refresh_ratio: f64,
    /// Relative central-difference step.
    pub fd_step: f64,
    /// Condition number of the standardized Jacobian treated as singular.
    pub max_condition: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100,
            refresh_ratio: 0.5,
            fd_step: 1e-5,
            max_condition: 1e12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverPath {
    Contraction,
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub theta: ParamVector,
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
    pub path: SolverPath,
    /// Condition number of `B J C` at the last refresh.
    pub jacobian_condition: f64,
    pub warnings: Vec<String>,
}

fn scaled_norm(b: &DVector<f64>, f: &[f64]) -> f64 {
    f.iter().zip(b.iter()).map(|(x, s)| (x * s).abs()).fold(0.0, f64::max)
}

fn finite_difference_jacobian<F: MomentFunction + ?Sized>(
    func: &F,
    theta: &ParamVector,
    step: f64,
) -> Result<DMatrix<f64>> {
    let d = theta.dim();
    let mut cols = Vec::with_capacity(d);
    for i in 0..d {
        let h = step * (1.0 + theta.coords[i].abs());
        let mut up = theta.clone();
        let mut dn = theta.clone();
        up.coords[i] += h;
        dn.coords[i] -= h;
        // one-sided differences at the edge of the domain
        let (fu, fd, span) = match (func.eval(&up), func.eval(&dn)) {
            (Ok(fu), Ok(fd)) => (fu, fd, 2.0 * h),
            (Ok(fu), Err(_)) => (fu, func.eval(theta)?, h),
            (Err(_), Ok(fd)) => (func.eval(theta)?, fd, h),
            (Err(e), Err(_)) => return Err(e),
        };
        cols.push(DVector::from_iterator(fu.len(), fu.iter().zip(&fd).map(|(a, b)| (a - b) / span)));
    }
    Ok(DMatrix::from_columns(&cols))
}

fn jacobian<F: MomentFunction + ?Sized>(func: &F, theta: &ParamVector, step: f64) -> Result<(Vec<f64>, DMatrix<f64>)> {
    match func.eval_jacobian(theta)? {
        Some(fj) => Ok(fj),
        None => Ok((func.eval(theta)?, finite_difference_jacobian(func, theta, step)?)),
    }
}

/// Step `−C (B J C)^{-1} B F` with the condition number of `B J C`.
fn scaled_step(
    b: &DVector<f64>,
    c: &DMatrix<f64>,
    j: &DMatrix<f64>,
    f: &[f64],
    max_condition: f64,
) -> Result<(DVector<f64>, f64)> {
    let bm = DMatrix::from_diagonal(b);
    let w = &bm * j * c;
    let cond = condition_number(&w);
    if !cond.is_finite() || cond > max_condition {
        return Err(Error::Regularity(format!(
            "standardized Jacobian is singular (condition number {cond:.3e}); the design (λ_r, γ_r) \
             does not identify θ here, see the regularity determinants of the fixed designs"
        )));
    }
    let bf = DVector::from_iterator(f.len(), f.iter().zip(b.iter()).map(|(x, s)| x * s));
    let z = w
        .lu()
        .solve(&bf)
        .ok_or_else(|| Error::Regularity("standardized Jacobian is singular".into()))?;
    Ok((-(c * z), cond))
}

struct Projector {
    consecutive: usize,
    warnings: Vec<String>,
}

impl Projector {
    fn apply(&mut self, theta: &mut ParamVector, it: usize) -> Result<()> {
        if theta.project() {
            self.consecutive += 1;
            self.warnings.push(format!("iterate {it} left the parameter domain and was projected back"));
            if self.consecutive >= 2 {
                return Err(Error::Solver(format!(
                    "two consecutive projections onto the parameter domain at iterate {it}"
                )));
            }
        } else {
            self.consecutive = 0;
        }
        Ok(())
    }
}

fn eval_or_inf<F: MomentFunction + ?Sized>(func: &F, theta: &ParamVector, b: &DVector<f64>) -> (Option<Vec<f64>>, f64) {
    match func.eval(theta) {
        Ok(f) => {
            let r = scaled_norm(b, &f);
            if r.is_finite() {
                (Some(f), r)
            } else {
                (None, f64::INFINITY)
            }
        }
        Err(_) => (None, f64::INFINITY),
    }
}

/// Solve `F(θ) = 0` starting from `init`.
pub fn solve<F: MomentFunction + ?Sized>(func: &F, init: &ParamVector, opts: &SolveOptions) -> Result<SolveOutcome> {
    let mut proj = Projector {
        consecutive: 0,
        warnings: Vec::new(),
    };
    let mut theta = init.clone();
    proj.apply(&mut theta, 0)?;
    match contraction(func, theta.clone(), opts, &mut proj) {
        Ok(out) if out.converged => Ok(out),
        Err(e @ Error::Regularity(_)) => Err(e),
        first => {
            let mut note = match &first {
                Ok(o) => format!("contraction stopped at residual {:.3e}", o.residual_norm),
                Err(e) => format!("contraction failed: {e}"),
            };
            note.push_str("; switching to damped Newton");
            proj.warnings.push(note);
            proj.consecutive = 0;
            let start = match &first {
                Ok(o) if o.residual_norm.is_finite() => o.theta.clone(),
                _ => theta,
            };
            newton(func, start, opts, &mut proj)
        }
    }
}

fn contraction<F: MomentFunction + ?Sized>(
    func: &F,
    mut theta: ParamVector,
    opts: &SolveOptions,
    proj: &mut Projector,
) -> Result<SolveOutcome> {
    let (mut f, mut j) = jacobian(func, &theta, opts.fd_step)?;
    let (mut b, mut c) = func.scaling(&theta)?;
    let mut res = scaled_norm(&b, &f);
    let mut cond = f64::NAN;
    let mut it = 0;
    let mut fresh = true;
    while res > opts.tol && it < opts.max_iter {
        it += 1;
        let (step, k) = scaled_step(&b, &c, &j, &f, opts.max_condition)?;
        if fresh {
            cond = k;
        }
        let mut next = theta.clone();
        for (x, s) in next.coords.iter_mut().zip(step.iter()) {
            *x += s;
        }
        proj.apply(&mut next, it)?;
        let (fn_next, res_next) = eval_or_inf(func, &next, &b);
        let Some(fv) = fn_next else {
            return Ok(outcome(theta, it, res, false, SolverPath::Contraction, cond, proj));
        };
        if res_next >= res {
            if fresh {
                return Ok(outcome(theta, it, res, false, SolverPath::Contraction, cond, proj));
            }
            let (f2, j2) = jacobian(func, &theta, opts.fd_step)?;
            f = f2;
            j = j2;
            (b, c) = func.scaling(&theta)?;
            fresh = true;
            continue;
        }
        let ratio = res_next / res;
        theta = next;
        f = fv;
        res = res_next;
        fresh = false;
        if ratio > opts.refresh_ratio && res > opts.tol {
            let (f2, j2) = jacobian(func, &theta, opts.fd_step)?;
            f = f2;
            j = j2;
            (b, c) = func.scaling(&theta)?;
            res = scaled_norm(&b, &f);
            fresh = true;
        }
    }
    if cond.is_nan() {
        let bm = DMatrix::from_diagonal(&b);
        cond = condition_number(&(&bm * &j * &c));
    }
    let converged = res <= opts.tol;
    Ok(outcome(theta, it, res, converged, SolverPath::Contraction, cond, proj))
}

fn newton<F: MomentFunction + ?Sized>(
    func: &F,
    mut theta: ParamVector,
    opts: &SolveOptions,
    proj: &mut Projector,
) -> Result<SolveOutcome> {
    let (b, _) = func.scaling(&theta)?;
    let mut f = func.eval(&theta)?;
    let mut res = scaled_norm(&b, &f);
    let mut cond = f64::NAN;
    let mut it = 0;
    while res > opts.tol && it < opts.max_iter {
        it += 1;
        let j = finite_difference_jacobian(func, &theta, opts.fd_step)?;
        let (_, c) = func.scaling(&theta)?;
        let (step, k) = scaled_step(&b, &c, &j, &f, opts.max_condition)?;
        cond = k;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let mut next = theta.clone();
            for (x, s) in next.coords.iter_mut().zip(step.iter()) {
                *x += t * s;
            }
            let projected = next.project();
            let (fv, r) = eval_or_inf(func, &next, &b);
            if let Some(fv) = fv {
                if r < (1.0 - 1e-4 * t) * res {
                    accepted = Some((next, fv, r, projected));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((next, fv, r, projected)) = accepted else {
            break;
        };
        if projected {
            proj.consecutive += 1;
            proj.warnings.push(format!("Newton iterate {it} was projected back into the domain"));
            if proj.consecutive >= 2 {
                return Err(Error::Solver(format!(
                    "two consecutive projections onto the parameter domain at Newton iterate {it}"
                )));
            }
        } else {
            proj.consecutive = 0;
        }
        theta = next;
        f = fv;
        res = r;
    }
    let converged = res <= opts.tol;
    Ok(outcome(theta, it, res, converged, SolverPath::Newton, cond, proj))
}

fn outcome(
    theta: ParamVector,
    iterations: usize,
    residual_norm: f64,
    converged: bool,
    path: SolverPath,
    jacobian_condition: f64,
    proj: &Projector,
) -> SolveOutcome {
    SolveOutcome {
        theta,
        iterations,
        residual_norm,
        converged,
        path,
        jacobian_condition,
        warnings: proj.warnings.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Linear {
        a: DMatrix<f64>,
        star: Vec<f64>,
    }

    impl MomentFunction for Linear {
        fn eval(&self, theta: &ParamVector) -> Result<Vec<f64>> {
            let d = DVector::from_iterator(3, theta.coords.iter().zip(&self.star).map(|(x, s)| x - s));
            Ok((&self.a * d).iter().cloned().collect())
        }
    }

    #[test]
    fn linear_system_converges_fast() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, -0.1, 0.2, 1.5, 0.4, -0.3, 0.1, 0.9]);
        let lin = Linear {
            a,
            star: vec![1.2, 0.55, 1.4],
        };
        let init = ParamVector::adaptive(vec![0.9, 0.4, 1.1]).unwrap();
        let out = solve(&lin, &init, &SolveOptions::default()).unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 3, "{}", out.iterations);
        for (x, s) in out.theta.coords.iter().zip(&lin.star) {
            assert!((x - s).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_system_is_a_regularity_error() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let lin = Linear {
            a,
            star: vec![1.2, 0.55, 1.4],
        };
        let init = ParamVector::adaptive(vec![0.9, 0.4, 1.1]).unwrap();
        assert!(matches!(solve(&lin, &init, &SolveOptions::default()), Err(Error::Regularity(_))));
    }

    struct Cubic;

    impl MomentFunction for Cubic {
        fn eval(&self, theta: &ParamVector) -> Result<Vec<f64>> {
            let c = &theta.coords;
            Ok(vec![(c[0] - 1.0).powi(3) + 0.1 * (c[0] - 1.0), c[1] - 0.5, (c[2] - 1.5) * (1.0 + c[2])])
        }
    }

    #[test]
    fn nonlinear_root_found() {
        let init = ParamVector::adaptive(vec![1.6, 0.3, 1.0]).unwrap();
        let out = solve(&Cubic, &init, &SolveOptions::default()).unwrap();
        assert!(out.converged, "{out:?}");
        assert!((out.theta.coords[0] - 1.0).abs() < 1e-8);
        assert!((out.theta.coords[2] - 1.5).abs() < 1e-10);
    }
}

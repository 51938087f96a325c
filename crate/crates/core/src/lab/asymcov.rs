//! Asymptotic covariances of the moment vectors: lag sums of
//! cross-covariances of `f(λ_r Y_{z,γ_r})`, estimated on long simulated
//! sequences of the dominant component, with exact Gaussian counterparts.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::params::{spectral_scale, Method, ParamVector};
use crate::estimators::MomentDesign;
use crate::lfsm::kernel::{difference_weights, gaussian_kernel_norm};
use crate::lfsm::{k_order_increments, ModelParams, SamplingScheme, Simulator};
use crate::spectral::TestFunction;
use crate::stable::RngHandle;
use crate::stats::pairwise_sum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsympCovOptions {
    /// Length of each simulated increment sequence.
    pub length: usize,
    /// Independent sequences averaged.
    pub reps: usize,
    /// Largest lag considered for the truncation point.
    pub max_lag: usize,
    /// Lag terms below `rel_cut` times the lag-0 term end the sum.
    pub rel_cut: f64,
    pub seed: u64,
    /// Step sizes `h` of the derivative quotient for the thresholded block.
    pub h_grid: Vec<f64>,
}

impl Default for AsympCovOptions {
    fn default() -> Self {
        Self {
            length: 1 << 17,
            reps: 4,
            max_lag: 200,
            rel_cut: 1e-4,
            seed: 1,
            h_grid: vec![1e-2, 1e-3, 1e-4],
        }
    }
}

/// A truncated lag sum with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LagSum {
    /// Symmetric, projected onto the positive semidefinite cone.
    pub matrix: DMatrix<f64>,
    /// Smallest eigenvalue before projection.
    pub min_eigenvalue: f64,
    pub z_max: usize,
    /// `max_{r,r'} Σ_{z_max < |z| ≤ 2 z_max} |term|`: how much doubling the
    /// truncation point can move any entry.
    pub truncation_bound: f64,
    pub warnings: Vec<String>,
}

/// Symmetrize and floor the eigenvalues at zero.
pub fn psd_projection(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let s = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let floored = eig.eigenvalues.map(|v| v.max(0.0));
    let p = &eig.eigenvectors * DMatrix::from_diagonal(&floored) * eig.eigenvectors.transpose();
    (p, min)
}

/// `Cov(Y_{z,γ}, Y_{0,γ'})` for the `k`-th order increments of the
/// unit-scale Gaussian lfsm (`E exp(iλY_1) = exp(−V_H λ²)`, `V_H = ∫ g²`).
pub fn fbm_kdiff_cov(hurst: f64, k: usize, gamma: usize, gamma2: usize, z: i64) -> f64 {
    let vh = gaussian_kernel_norm(hurst, 1);
    let c = difference_weights(k);
    let mut s = 0.0;
    for (v, cv) in c.iter().enumerate() {
        for (w, cw) in c.iter().enumerate() {
            let d = (z - (v * gamma) as i64 + (w * gamma2) as i64).abs() as f64;
            if d > 0.0 {
                s += cv * cw * d.powf(2.0 * hurst);
            }
        }
    }
    -vh * s
}

/// Exact `Σ̃` for a Gaussian dominant component `b Y^{H,2}` and the
/// Gaussian bump `exp(−c x²/2)`, by summing closed-form bivariate
/// Gaussian moments over lags until the terms fall below `1e-14`.
pub fn sigma_tilde_gaussian_exact(b: f64, hurst: f64, k: usize, tuples: &[(f64, usize)], decay: f64) -> DMatrix<f64> {
    let d = tuples.len();
    let mut m = DMatrix::zeros(d, d);
    for r in 0..d {
        for q in 0..d {
            let (l1, g1) = tuples[r];
            let (l2, g2) = tuples[q];
            let s11 = b * b * fbm_kdiff_cov(hurst, k, g1, g1, 0);
            let s22 = b * b * fbm_kdiff_cov(hurst, k, g2, g2, 0);
            let (a1, a2) = (decay * l1 * l1, decay * l2 * l2);
            let m1 = (1.0 + a1 * s11).powf(-0.5);
            let m2 = (1.0 + a2 * s22).powf(-0.5);
            let term = |z: i64| {
                let s12 = b * b * fbm_kdiff_cov(hurst, k, g1, g2, z);
                let det = (1.0 + a1 * s11) * (1.0 + a2 * s22) - a1 * a2 * s12 * s12;
                det.powf(-0.5) - m1 * m2
            };
            let mut acc = term(0);
            let mut z = 1i64;
            loop {
                let t = term(z) + term(-z);
                acc += t;
                if (t.abs() < 1e-14 && z > 4) || z > 1_000_000 {
                    break;
                }
                z += 1;
            }
            m[(r, q)] = acc;
        }
    }
    m
}

/// Exact `Σ₁`: `(λ_r² λ_{r'}² / 2) f''(0)² a⁴ Σ_z Cov(Y_{z,γ_r}, Y_{0,γ_{r'}})²`
/// for the dominant Gaussian component `a Y^{H,2}`, terms below `1e-10`
/// ending the sum.
pub fn sigma1_exact(a: f64, hurst: f64, k: usize, tuples: &[(f64, usize)], f2_at_zero: f64) -> DMatrix<f64> {
    let d = tuples.len();
    let mut m = DMatrix::zeros(d, d);
    for r in 0..d {
        for q in 0..d {
            let (l1, g1) = tuples[r];
            let (l2, g2) = tuples[q];
            let pref = 0.5 * (l1 * l1 * l2 * l2) * f2_at_zero * f2_at_zero * a.powi(4);
            let term = |z: i64| fbm_kdiff_cov(hurst, k, g1, g2, z).powi(2);
            let mut acc = term(0);
            let mut z = 1i64;
            loop {
                let t = term(z) + term(-z);
                acc += t;
                if (t < 1e-10 * acc.abs().max(1e-300) && z > 4) || z > 1_000_000 {
                    break;
                }
                z += 1;
            }
            m[(r, q)] = pref * acc;
        }
    }
    m
}

/// Natural scale `b` from the spectral scale `b̃ = b^β ∫|g|^β`.
fn natural_scale(scale: f64, hurst: f64, beta: f64, k: usize) -> Result<f64> {
    if !(beta > 0.0 && beta <= 2.0) {
        return Err(Error::param(format!(
            "the dominant component needs β in (0, 2] for simulation, got {beta}"
        )));
    }
    let norm = spectral_scale(1.0, hurst, beta, k)?;
    Ok((scale / norm).powf(1.0 / beta))
}

/// Columns `Y_{l,γ}` (common rows) of one long unit-spacing sequence.
fn unit_sequence(
    b: f64,
    hurst: f64,
    beta: f64,
    k: usize,
    gammas: &[usize],
    length: usize,
    handle: &RngHandle,
) -> Result<Vec<Vec<f64>>> {
    let model = ModelParams::single(b, hurst, beta)?;
    let gmax = gammas.iter().copied().max().unwrap_or(1);
    let scheme = SamplingScheme::new(length + k * gmax, 1.0, k, gammas.to_vec())?;
    let path = Simulator::new(&model, &scheme)?.simulate(handle)?;
    Ok(k_order_increments(&path, k, gammas)?.columns)
}

/// Cross-covariance `C_{rr'}(z) = Cov(F_r(l + z), F_{r'}(l))` for `z ≥ 0`.
fn cross_cov(a: &[f64], b: &[f64], z: usize) -> f64 {
    let n = a.len().min(b.len());
    if z >= n {
        return 0.0;
    }
    let ma = pairwise_sum(a) / a.len() as f64;
    let mb = pairwise_sum(b) / b.len() as f64;
    let prods: Vec<f64> = (0..n - z).map(|l| (a[l + z] - ma) * (b[l] - mb)).collect();
    pairwise_sum(&prods) / n as f64
}

/// Lag sum `Σ_z C(z)` from per-lag matrices `C(0), C(1), ...` (each for
/// `z ≥ 0`, the negative lags being the transposes).
fn lag_sum(cs: &[DMatrix<f64>], rel_cut: f64, noise: f64) -> LagSum {
    let d = cs[0].nrows();
    let lag0 = (0..d).map(|i| cs[0][(i, i)].abs()).fold(0.0, f64::max);
    let cut = (rel_cut * lag0).max(noise);
    let two_sided = |z: usize| if z == 0 { cs[0].clone() } else { &cs[z] + cs[z].transpose() };
    let mut warnings = Vec::new();
    let mut z_max = cs.len() - 1;
    for (z, c) in cs.iter().enumerate().skip(1) {
        if c.iter().all(|v| v.abs() < cut) {
            z_max = z;
            break;
        }
    }
    let half = (cs.len() - 1) / 2;
    if z_max > half {
        warnings.push(format!(
            "covariance terms did not fall below {cut:.3e} by lag {half}; the lag sum is truncated there"
        ));
        z_max = half.max(1);
    }
    let mut acc = DMatrix::zeros(d, d);
    for z in 0..=z_max {
        acc += two_sided(z);
    }
    let mut tail = DMatrix::<f64>::zeros(d, d);
    for z in z_max + 1..=(2 * z_max).min(cs.len() - 1) {
        tail += two_sided(z).map(f64::abs);
    }
    let truncation_bound = tail.iter().cloned().fold(0.0, f64::max);
    let (matrix, min_eigenvalue) = psd_projection(&acc);
    LagSum {
        matrix,
        min_eigenvalue,
        z_max,
        truncation_bound,
        warnings,
    }
}

/// Monte Carlo `Σ̃_{r,r'} = Σ_z Cov[f(λ_r b₁Y_{z,γ_r}), f(λ_{r'} b₁Y_{0,γ_{r'}})]`
/// for the dominant component of an adaptive θ.
pub fn estimate_asymp_cov_g(theta: &ParamVector, design: &MomentDesign, k: usize, opts: &AsympCovOptions) -> Result<LagSum> {
    if theta.method != Method::Adaptive {
        return Err(Error::param("Σ̃ needs an adaptive parameter vector"));
    }
    let c = theta.components()[0];
    let b = natural_scale(c.scale, c.hurst, c.beta, k)?;
    let tuples: Vec<(f64, usize, TestFunction)> = design
        .tuples
        .iter()
        .map(|t| (t.lambda, t.gamma, design.functions[t.function]))
        .collect();
    lag_sum_mc(b, c.hurst, c.beta, k, &tuples, opts)
}

fn lag_sum_mc(
    b: f64,
    hurst: f64,
    beta: f64,
    k: usize,
    tuples: &[(f64, usize, TestFunction)],
    opts: &AsympCovOptions,
) -> Result<LagSum> {
    if opts.length < 16 || opts.reps == 0 || opts.max_lag == 0 {
        return Err(Error::config("asymptotic covariance options need length ≥ 16, reps ≥ 1, max_lag ≥ 1"));
    }
    let mut gammas: Vec<usize> = tuples.iter().map(|t| t.1).collect();
    gammas.sort_unstable();
    gammas.dedup();
    let d = tuples.len();
    let lags = (2 * opts.max_lag).min(opts.length / 2);
    let root = RngHandle::new(opts.seed, 0);
    let mut cs = vec![DMatrix::zeros(d, d); lags + 1];
    let mut lag0 = 0.0;
    for rep in 0..opts.reps {
        let cols = unit_sequence(b, hurst, beta, k, &gammas, opts.length, &root.child(rep as u64))?;
        let series: Vec<Vec<f64>> = tuples
            .iter()
            .map(|(l, g, f)| {
                let col = &cols[gammas.iter().position(|x| x == g).unwrap()];
                col.iter().map(|x| f.eval(l * x)).collect()
            })
            .collect();
        for (z, cz) in cs.iter_mut().enumerate() {
            for r in 0..d {
                for q in 0..d {
                    cz[(r, q)] += cross_cov(&series[r], &series[q], z) / opts.reps as f64;
                }
            }
        }
        lag0 = (0..d).map(|i| cs[0][(i, i)]).fold(0.0, f64::max);
    }
    let noise = 4.0 * lag0 / ((opts.length * opts.reps) as f64).sqrt();
    Ok(lag_sum(&cs, opts.rel_cut, noise))
}

/// `Σ₁` (exact) and `Σ₂` (Monte Carlo, Richardson-extrapolated in `h`) of
/// the threshold equation.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdCov {
    pub sigma1: DMatrix<f64>,
    pub sigma2: DMatrix<f64>,
    /// Derivative quotients `Q(h)` for each `h` of the grid.
    pub quotients: Vec<DMatrix<f64>>,
    /// First Richardson level (one entry per consecutive pair of `h`).
    pub richardson: Vec<DMatrix<f64>>,
    /// Largest relative difference between successive first-level values.
    pub richardson_gap: f64,
    pub warnings: Vec<String>,
}

/// `Σ₁` from the exact fBm covariances of the dominant Gaussian component
/// and `Σ₂ = Σ_z d/dh E[f₂(h^{1/β₁}λ_r Y_z) f₂(h^{1/β₁}λ_{r'} Y_0)]|_{h=0}`
/// from the quotients `E[·]/h` on simulated increments of the dominant
/// stable component, extrapolated over the `h` grid.
pub fn estimate_asymp_cov_threshold(
    theta: &ParamVector,
    design: &MomentDesign,
    k: usize,
    opts: &AsympCovOptions,
) -> Result<ThresholdCov> {
    if theta.method != Method::Threshold || design.tuples.len() != 10 {
        return Err(Error::param("Σ₁ and Σ₂ need a threshold parameter vector and design"));
    }
    let c = theta.components();
    let a1 = natural_scale(c[0].scale, c[0].hurst, 2.0, k)?;
    let f1 = design.functions[design.tuples[0].function];
    let t1: Vec<(f64, usize)> = design.tuples[..4].iter().map(|t| (t.lambda, t.gamma)).collect();
    let sigma1 = sigma1_exact(a1, c[0].hurst, k, &t1, f1.second_derivative_at_zero());
    let (hb, beta) = (c[2].hurst, c[2].beta);
    let b1 = natural_scale(c[2].scale, hb, beta, k)?;
    let f2 = design.functions[design.tuples[4].function];
    let t2: Vec<(f64, usize)> = design.tuples[4..].iter().map(|t| (t.lambda, t.gamma)).collect();
    let mut h = opts.h_grid.clone();
    if h.len() < 2 || h.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::config("the h grid needs at least two positive steps"));
    }
    h.sort_by(|a, b| b.total_cmp(a));
    let mut gammas: Vec<usize> = t2.iter().map(|t| t.1).collect();
    gammas.sort_unstable();
    gammas.dedup();
    let gmax = *gammas.last().unwrap();
    let z_max = 2 * k * gmax;
    let d = t2.len();
    let root = RngHandle::new(opts.seed, 1);
    let mut quotients = vec![DMatrix::zeros(d, d); h.len()];
    for rep in 0..opts.reps {
        let cols = unit_sequence(b1, hb, beta, k, &gammas, opts.length, &root.child(rep as u64))?;
        let n = cols[0].len();
        for (hi, &hv) in h.iter().enumerate() {
            let s = hv.powf(1.0 / beta);
            let series: Vec<Vec<f64>> = t2
                .iter()
                .map(|(l, g)| {
                    let col = &cols[gammas.iter().position(|x| x == g).unwrap()];
                    col.iter().map(|x| f2.eval(s * l * x)).collect()
                })
                .collect();
            for r in 0..d {
                for q in 0..d {
                    let mut acc = 0.0;
                    for z in 0..=z_max.min(n - 1) {
                        let m = n - z;
                        let fwd: Vec<f64> = (0..m).map(|l| series[r][l + z] * series[q][l]).collect();
                        acc += pairwise_sum(&fwd) / m as f64;
                        if z > 0 {
                            let bwd: Vec<f64> = (0..m).map(|l| series[r][l] * series[q][l + z]).collect();
                            acc += pairwise_sum(&bwd) / m as f64;
                        }
                    }
                    quotients[hi][(r, q)] += acc / hv / opts.reps as f64;
                }
            }
        }
    }
    let richardson: Vec<DMatrix<f64>> = (0..h.len() - 1)
        .map(|i| {
            let ratio = h[i] / h[i + 1];
            (&quotients[i + 1] * ratio - &quotients[i]) / (ratio - 1.0)
        })
        .collect();
    let mut richardson_gap = 0.0;
    for w in richardson.windows(2) {
        let scale = w[1].iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
        let diff = (&w[1] - &w[0]).iter().map(|v| v.abs()).fold(0.0, f64::max);
        richardson_gap = f64::max(richardson_gap, diff / scale);
    }
    let mut warnings = Vec::new();
    if richardson_gap > 0.05 {
        warnings.push(format!(
            "successive Richardson levels differ by {:.1}%; Σ₂ is not self-converged",
            100.0 * richardson_gap
        ));
    }
    let (sigma2, min_eig) = psd_projection(richardson.last().unwrap());
    if min_eig < -1e-10 {
        warnings.push(format!("Σ₂ had eigenvalue {min_eig:.3e} before projection"));
    }
    Ok(ThresholdCov {
        sigma1,
        sigma2,
        quotients,
        richardson,
        richardson_gap,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{default_f1, MomentTuple};

    #[test]
    fn fbm_increment_variance() {
        // k = 1, γ = 1: Var(Y_1) = 2 V_H
        let h = 0.3;
        let v = fbm_kdiff_cov(h, 1, 1, 1, 0);
        assert!((v - 2.0 * gaussian_kernel_norm(h, 1)).abs() < 1e-12);
        // symmetry Cov(Y_{z,γ}, Y_{0,γ'}) = Cov(Y_{-z,γ'}, Y_{0,γ})
        for z in -5..=5 {
            assert!((fbm_kdiff_cov(h, 2, 1, 2, z) - fbm_kdiff_cov(h, 2, 2, 1, -z)).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_floors_negative_eigenvalues() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let (p, min) = psd_projection(&m);
        assert!((min + 1.0).abs() < 1e-12);
        let e = SymmetricEigen::new(p).eigenvalues;
        assert!(e.iter().all(|v| *v >= -1e-12));
    }

    #[test]
    fn gaussian_sigma_tilde_matches_closed_form() {
        let (b, h, k) = (1.0, 0.3, 2);
        let mut design = MomentDesign::default_adaptive(1, default_f1());
        design.tuples = vec![MomentTuple::new(0.5, 1, 0), MomentTuple::new(0.5, 2, 0)];
        let theta = ParamVector::adaptive(vec![spectral_scale(b, h, 2.0, k).unwrap(), h, 2.0]).unwrap();
        let opts = AsympCovOptions {
            length: 1 << 16,
            reps: 4,
            ..Default::default()
        };
        let mc = estimate_asymp_cov_g(&theta, &design, k, &opts).unwrap();
        let exact = sigma_tilde_gaussian_exact(b, h, k, &[(0.5, 1), (0.5, 2)], 1.0);
        for (x, y) in mc.matrix.iter().zip(exact.iter()) {
            assert!((x - y).abs() < 0.1 * exact[(0, 0)], "{} vs {}", mc.matrix, exact);
        }
        assert!(mc.min_eigenvalue > -1e-10);
        assert!(mc.matrix.diagonal().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn zero_scale_threshold_gives_zero_matrix() {
        let f2 = TestFunction::threshold(1.0, 0.5, 1.0);
        let tuples = vec![(1e-12, 1, f2), (1e-12, 2, f2)];
        let r = lag_sum_mc(1.0, 0.7, 1.5, 2, &tuples, &AsympCovOptions {
            length: 4096,
            reps: 1,
            ..Default::default()
        })
        .unwrap();
        assert!(r.matrix.iter().all(|v| *v == 0.0));
    }
}

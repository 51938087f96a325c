//! Path simulation by discretised moving averages.
//!
//! Each component is generated at unit spacing: the first-order increments
//! `ε_l = ∫ κ(l - s) dZ_s`, `κ(x) = x_+^α - (x-1)_+^α`, are approximated by a
//! sum over noise cells of width `1/mesh` whose weights reproduce the
//! β-norm of `κ` on every cell exactly. Self-similarity then maps the unit
//! path to spacing `Δ` by the factor `Δ^H`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::kernel::increment_cell_weights;
use super::{Component, ModelParams, SamplingScheme};
use crate::error::{Error, Result};
use crate::stable::{fill_sym_stable, validate_beta, RngHandle};

/// Largest number of noise draws (per component) a single path may use.
pub const DEFAULT_MAX_NOISE: usize = 1 << 27;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ConvMethod {
    #[default]
    Auto,
    Direct,
    Fft,
}

/// Observed path `X_{lΔ}`, `l = 1..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub delta: f64,
    pub values: Vec<f64>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

enum Filter {
    Levy,
    Kernel {
        weights: Vec<f64>,
        /// FFT of each polyphase filter, indexed by phase r.
        spectra: Option<Vec<Vec<Complex64>>>,
    },
}

struct ComponentSim {
    comp: Component,
    filter: Filter,
}

/// Reusable simulator: kernel weights and filter spectra are computed once.
pub struct Simulator {
    scheme: SamplingScheme,
    comps: Vec<ComponentSim>,
    fft_len: usize,
    fwd: Option<Arc<dyn Fft<f64>>>,
    inv: Option<Arc<dyn Fft<f64>>>,
    method: ConvMethod,
}

fn fast_len(min: usize) -> usize {
    let mut best = min.next_power_of_two();
    let mut p3 = 1usize;
    while p3 < best {
        let mut v = p3;
        while v < min {
            v *= 2;
        }
        best = best.min(v);
        p3 *= 3;
    }
    best
}

impl Simulator {
    pub fn new(params: &ModelParams, scheme: &SamplingScheme) -> Result<Self> {
        Self::with_options(params, scheme, ConvMethod::Auto, DEFAULT_MAX_NOISE)
    }

    pub fn with_options(
        params: &ModelParams,
        scheme: &SamplingScheme,
        method: ConvMethod,
        max_noise: usize,
    ) -> Result<Self> {
        params.validate()?;
        scheme.validate()?;
        let (n, m, t) = (scheme.n, scheme.mesh, scheme.truncation);
        let noise = (n + t - 1)
            .checked_mul(m)
            .ok_or_else(|| Error::Capacity("noise length overflows".into()))?;
        if noise > max_noise {
            return Err(Error::Capacity(format!(
                "path needs {noise} noise draws per component, limit is {max_noise}"
            )));
        }
        let len = n + t - 1;
        let use_fft = match method {
            ConvMethod::Fft => true,
            ConvMethod::Direct => false,
            ConvMethod::Auto => (n as f64) * (t as f64) > 2.0e5,
        };
        let fft_len = fast_len(len);
        let (fwd, inv) = if use_fft {
            let mut planner = FftPlanner::new();
            (
                Some(planner.plan_fft_forward(fft_len)),
                Some(planner.plan_fft_inverse(fft_len)),
            )
        } else {
            (None, None)
        };
        let spectra_bytes = m * fft_len * 16 * params.components.len();
        if use_fft && spectra_bytes > 8 * max_noise {
            return Err(Error::Capacity(format!(
                "filter spectra need {spectra_bytes} bytes"
            )));
        }
        let mut comps = Vec::with_capacity(params.components.len());
        for c in &params.components {
            validate_beta(c.beta)?;
            let filter = if c.is_levy() {
                Filter::Levy
            } else {
                let weights = increment_cell_weights(c.hurst, c.beta, m, m * t)?;
                let spectra = match &fwd {
                    Some(f) => Some(
                        (0..m)
                            .map(|r| {
                                let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
                                for q in 0..t {
                                    buf[q].re = weights[q * m + r];
                                }
                                f.process(&mut buf);
                                buf
                            })
                            .collect(),
                    ),
                    None => None,
                };
                Filter::Kernel { weights, spectra }
            };
            comps.push(ComponentSim { comp: *c, filter });
        }
        Ok(Self {
            scheme: scheme.clone(),
            comps,
            fft_len,
            fwd,
            inv,
            method,
        })
    }

    pub fn scheme(&self) -> &SamplingScheme {
        &self.scheme
    }

    /// Unit-spacing first-order increments of component `j`.
    pub fn unit_increments(&self, j: usize, handle: &RngHandle) -> Result<Vec<f64>> {
        let cs = self
            .comps
            .get(j)
            .ok_or_else(|| Error::param(format!("no component {j}")))?;
        let (n, m, t) = (self.scheme.n, self.scheme.mesh, self.scheme.truncation);
        let mut rng = handle.rng();
        match &cs.filter {
            Filter::Levy => {
                let mut e = vec![0.0; n];
                fill_sym_stable(cs.comp.beta, 1.0, &mut e, &mut rng)?;
                Ok(e)
            }
            Filter::Kernel { weights, spectra } => {
                let len = n + t - 1;
                let mut noise = vec![0.0; len * m];
                fill_sym_stable(cs.comp.beta, 1.0, &mut noise, &mut rng)?;
                match spectra {
                    Some(sp) => Ok(self.convolve_fft(&noise, sp)),
                    None => Ok(convolve_direct(&noise, weights, n, m, t)),
                }
            }
        }
    }

    fn convolve_fft(&self, noise: &[f64], spectra: &[Vec<Complex64>]) -> Vec<f64> {
        let (n, m, t) = (self.scheme.n, self.scheme.mesh, self.scheme.truncation);
        let len = n + t - 1;
        let fl = self.fft_len;
        let fwd = self.fwd.as_ref().expect("fft plan");
        let inv = self.inv.as_ref().expect("fft plan");
        let mut acc = vec![Complex64::new(0.0, 0.0); fl];
        let mut buf = vec![Complex64::new(0.0, 0.0); fl];
        // phase r reads noise[t_idx * m + (m - 1 - r)]; two phases share one
        // complex transform through the real/imaginary split
        let mut r = 0;
        while r < m {
            let pa = m - 1 - r;
            let pair = r + 1 < m;
            for (i, b) in buf.iter_mut().enumerate() {
                if i < len {
                    b.re = noise[i * m + pa];
                    b.im = if pair { noise[i * m + pa - 1] } else { 0.0 };
                } else {
                    *b = Complex64::new(0.0, 0.0);
                }
            }
            fwd.process(&mut buf);
            let ha = &spectra[r];
            if pair {
                let hb = &spectra[r + 1];
                for f in 0..fl {
                    let zf = buf[f];
                    let zc = buf[(fl - f) % fl].conj();
                    let xa = (zf + zc) * 0.5;
                    let xb = (zf - zc) * Complex64::new(0.0, -0.5);
                    acc[f] += ha[f] * xa + hb[f] * xb;
                }
                r += 2;
            } else {
                for f in 0..fl {
                    acc[f] += ha[f] * buf[f];
                }
                r += 1;
            }
        }
        inv.process(&mut acc);
        let scale = 1.0 / fl as f64;
        (1..=n).map(|l| acc[l + t - 2].re * scale).collect()
    }

    /// Mixed path on the grid `lΔ`, `l = 1..=n`.
    pub fn simulate(&self, handle: &RngHandle) -> Result<Path> {
        let n = self.scheme.n;
        let delta = self.scheme.delta;
        let mut values = vec![0.0; n];
        for (j, cs) in self.comps.iter().enumerate() {
            let e = self.unit_increments(j, &handle.child(j as u64))?;
            let sc = delta.powf(cs.comp.hurst);
            let mut y = 0.0;
            for (v, inc) in values.iter_mut().zip(&e) {
                y += inc;
                *v += cs.comp.b * (sc * y);
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite path value", f64::NAN));
        }
        Ok(Path { delta, values })
    }

    pub fn method(&self) -> ConvMethod {
        self.method
    }
}

fn convolve_direct(noise: &[f64], w: &[f64], n: usize, m: usize, t: usize) -> Vec<f64> {
    (1..=n)
        .map(|l| {
            let top = (l + t - 1) * m - 1;
            let mut s = 0.0;
            for (c, wc) in w.iter().enumerate() {
                s += wc * noise[top - c];
            }
            s
        })
        .collect()
}

/// Simulate one path of the mixed model.
pub fn simulate_mixed_path(params: &ModelParams, scheme: &SamplingScheme, handle: &RngHandle) -> Result<Path> {
    Simulator::new(params, scheme)?.simulate(handle)
}

//! Tabulated Fourier transforms `f̂(v) = (1/2π) ∫ cos(vx) f(x) dx`.
//!
//! The table lives on the non-negative half of a symmetric grid with spacing
//! `h = 2 v_max / grid_size`. Transforms are computed by one DFT of the
//! trapezoid rule in `x`, which is spectrally accurate for the smooth,
//! rapidly decaying test functions.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::testfn::TestFunction;
use crate::error::{Error, Result};

/// Tolerance on the discarded tail `∫_{|v| > v_max} |f̂|`.
pub const TAIL_TOL: f64 = 1e-10;
/// Period `2π/h` of the Poisson aliasing in `x` targeted by the default grid.
pub const ALIAS_PERIOD: f64 = 4000.0;
pub const DEFAULT_GRID: usize = 1 << 14;

#[derive(Debug, Clone)]
pub struct FourierTable {
    pub f: TestFunction,
    pub v_max: f64,
    pub grid_size: usize,
    /// Spacing of the v-grid.
    pub h: f64,
    /// `f̂(i h)`, `i = 0..=grid_size/2`.
    pub fhat: Vec<f64>,
    /// Full-line trapezoid weight times `f̂` at each node, trimmed where
    /// the remaining mass is below 1e-15.
    pub(crate) wts: Vec<f64>,
    pub(crate) ln_v: Vec<f64>,
}

fn dft_transform(f: &TestFunction, h: f64, half: usize) -> Vec<f64> {
    let support = f.support_radius();
    // x-spacing must resolve frequencies up to v_max and the x-range
    // M·hx = 2π/h must cover the support
    let hx_max = (std::f64::consts::PI / (2.0 * h * half as f64)).min(0.01);
    let mut m = (2.0 * std::f64::consts::PI / (h * hx_max)).ceil() as usize;
    m = m.max(2 * half + 2).next_power_of_two();
    let hx = 2.0 * std::f64::consts::PI / (m as f64 * h);
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    let nx = ((support / hx).ceil() as usize + 1).min(m / 2);
    for (i, b) in buf.iter_mut().enumerate().take(nx) {
        let w = if i == 0 { 0.5 } else { 1.0 };
        b.re = w * f.eval(i as f64 * hx);
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    (0..=half).map(|j| buf[j].re * hx / std::f64::consts::PI).collect()
}

impl FourierTable {
    /// Table on `[-v_max, v_max]` with `grid_size` intervals.
    pub fn build(f: &TestFunction, v_max: f64, grid_size: usize) -> Result<Self> {
        f.validate()?;
        if !(v_max > 0.0) || grid_size < 16 || grid_size % 2 != 0 {
            return Err(Error::param("v_max must be positive and grid_size even and at least 16"));
        }
        let half = grid_size / 2;
        let h = 2.0 * v_max / grid_size as f64;
        let fhat = dft_transform(f, h, half);
        let quarter = (0.75 * half as f64) as usize;
        let top: f64 = fhat[quarter..].iter().map(|x| x.abs()).sum::<f64>() * 2.0 * h;
        if top > TAIL_TOL {
            return Err(Error::Resolution(format!(
                "Fourier tail mass {top:.3e} beyond 0.75·v_max exceeds {TAIL_TOL:e}; increase v_max"
            )));
        }
        Ok(Self::finish(*f, v_max, grid_size, h, fhat))
    }

    fn finish(f: TestFunction, v_max: f64, grid_size: usize, h: f64, fhat: Vec<f64>) -> Self {
        let mut wts: Vec<f64> = fhat
            .iter()
            .enumerate()
            .map(|(i, x)| if i == 0 { h * x } else { 2.0 * h * x })
            .collect();
        let mut tail = 0.0;
        let mut keep = wts.len();
        for i in (0..wts.len()).rev() {
            tail += wts[i].abs();
            if tail > 1e-15 {
                keep = (i + 1).min(wts.len());
                break;
            }
        }
        wts.truncate(keep.max(2));
        let ln_v = (0..wts.len())
            .map(|i| if i == 0 { f64::NEG_INFINITY } else { (i as f64 * h).ln() })
            .collect();
        Self {
            f,
            v_max,
            grid_size,
            h,
            fhat,
            wts,
            ln_v,
        }
    }

    /// Default table: `v_max` grown until the tail criterion holds, grid
    /// refined so that the aliasing period is at least `ALIAS_PERIOD`.
    pub fn auto(f: &TestFunction) -> Result<Self> {
        f.validate()?;
        let mut v_max = match f {
            TestFunction::GaussBump { decay } => 8.0 * decay.sqrt(),
            TestFunction::SmoothThreshold { width, decay, .. } => 100.0 * decay.sqrt().max(1.0) / width.min(1.0),
        };
        for _ in 0..12 {
            let grid = grid_for(v_max);
            match Self::build(f, v_max, grid) {
                Ok(t) => return Ok(t),
                Err(Error::Resolution(_)) => v_max *= 1.5,
                Err(e) => return Err(e),
            }
        }
        Err(Error::Resolution("Fourier transform does not decay".into()))
    }

    /// Process-wide cache of `auto` tables.
    pub fn cached(f: &TestFunction) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<String, Arc<FourierTable>>>> = OnceLock::new();
        let key = format!("{f:?}");
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(t) = cache.lock().unwrap().get(&key) {
            return Ok(t.clone());
        }
        let t = Arc::new(Self::auto(f)?);
        cache.lock().unwrap().insert(key, t.clone());
        Ok(t)
    }

    /// `f̂(v)` by cubic interpolation on the table (zero beyond `v_max`).
    pub fn eval(&self, v: f64) -> f64 {
        let a = v.abs() / self.h;
        let i = a.floor() as isize;
        let n = self.fhat.len() as isize;
        if i >= n - 1 {
            return 0.0;
        }
        let t = a - i as f64;
        let get = |j: isize| -> f64 {
            if j < 0 {
                self.fhat[(-j) as usize]
            } else if j >= n {
                0.0
            } else {
                self.fhat[j as usize]
            }
        };
        let (p0, p1, p2, p3) = (get(i - 1), get(i), get(i + 1), get(i + 2));
        p1 + 0.5
            * t
            * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)))
    }

    /// `∫ f̂(v) cos(vx) dv` on the table; recovers `f(x)`.
    pub fn invert(&self, x: f64) -> f64 {
        self.wts
            .iter()
            .enumerate()
            .map(|(i, w)| w * (i as f64 * self.h * x).cos())
            .sum()
    }

    pub fn nodes(&self) -> usize {
        self.wts.len()
    }
}

pub fn grid_for(v_max: f64) -> usize {
    let need = (2.0 * v_max * ALIAS_PERIOD / (2.0 * std::f64::consts::PI)).ceil() as usize;
    need.next_power_of_two().max(DEFAULT_GRID)
}

/// Tabulated transform on `[-v_max, v_max]`.
pub fn fourier_transform(f: &TestFunction, v_max: f64, grid_size: usize) -> Result<FourierTable> {
    FourierTable::build(f, v_max, grid_size)
}

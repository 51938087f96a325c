//! k-th order increments at several lags.

use serde::{Deserialize, Serialize};

use super::kernel::difference_weights;
use super::simulate::Path;
use crate::error::{Error, Result};

/// `X_{l,n,γ_r} = Σ_v (-1)^v C(k,v) X_{(l - vγ_r)Δ}` for the common rows
/// `l = k·max γ + 1 ..= n`, one column per lag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementPanel {
    pub k: usize,
    pub gammas: Vec<usize>,
    pub delta: f64,
    /// First row index `l` (1-based, as on the observation grid).
    pub first_l: usize,
    pub columns: Vec<Vec<f64>>,
}

impl IncrementPanel {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.len())
    }

    pub fn column_for(&self, gamma: usize) -> Option<&[f64]> {
        self.gammas
            .iter()
            .position(|g| *g == gamma)
            .map(|i| self.columns[i].as_slice())
    }
}

pub fn k_order_increments(path: &Path, k: usize, gammas: &[usize]) -> Result<IncrementPanel> {
    if k == 0 {
        return Err(Error::param("differencing order must be at least 1"));
    }
    if gammas.is_empty() || gammas.contains(&0) {
        return Err(Error::param("lags must be positive"));
    }
    let n = path.values.len();
    let gmax = *gammas.iter().max().unwrap();
    let first = k * gmax + 1;
    if n < first {
        return Err(Error::input(format!(
            "insufficient path length: n = {n} but l - k·γ ≥ 1 needs l ≥ {first} (k = {k}, γ = {gmax})"
        )));
    }
    let w = difference_weights(k);
    let x = &path.values;
    let columns = gammas
        .iter()
        .map(|&g| {
            (first..=n)
                .map(|l| {
                    let mut s = 0.0;
                    for (v, c) in w.iter().enumerate() {
                        s += c * x[l - v * g - 1];
                    }
                    s
                })
                .collect()
        })
        .collect();
    Ok(IncrementPanel {
        k,
        gammas: gammas.to_vec(),
        delta: path.delta,
        first_l: first,
        columns,
    })
}

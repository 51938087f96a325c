//! Symmetric β-stable variates and seeded random streams.
//!
//! Standardisation: `E exp(iλZ) = exp(-|λ|^β)`, so β = 2 gives N(0, 2).

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};

/// Seed plus stream identifier. Two handles with the same pair produce the
/// same draws; distinct streams are independent ChaCha streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RngHandle {
    pub seed: u64,
    pub stream: u64,
}

impl RngHandle {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream);
        r
    }

    /// Derived handle for a sub-task (replication, component, ...).
    pub fn child(&self, k: u64) -> Self {
        Self {
            seed: self.seed,
            stream: splitmix(self.stream ^ splitmix(k.wrapping_add(0x9E37_79B9_7F4A_7C15))),
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform on the open interval (0, 1).
#[inline]
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

pub fn validate_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 2.0) {
        return Err(Error::param(format!("stability index {beta} outside (0, 2]")));
    }
    Ok(())
}

/// One standard symmetric stable draw (Chambers–Mallows–Stuck).
#[inline]
pub fn draw_standard<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    if beta == 2.0 {
        let z: f64 = rng.sample(StandardNormal);
        return std::f64::consts::SQRT_2 * z;
    }
    let u = std::f64::consts::PI * (open_unit(rng) - 0.5);
    if beta == 1.0 {
        return u.tan();
    }
    let w: f64 = rng.sample::<f64, _>(Exp1).max(f64::MIN_POSITIVE);
    let cu = u.cos();
    (beta * u).sin() / cu.powf(1.0 / beta) * (((1.0 - beta) * u).cos() / w).powf((1.0 - beta) / beta)
}

/// Fill `out` with symmetric stable draws of the given scale.
pub fn fill_sym_stable<R: Rng + ?Sized>(beta: f64, scale: f64, out: &mut [f64], rng: &mut R) -> Result<()> {
    validate_beta(beta)?;
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::param(format!("scale {scale} must be finite and nonnegative")));
    }
    for x in out.iter_mut() {
        *x = scale * draw_standard(beta, rng);
    }
    Ok(())
}

/// `n` i.i.d. symmetric stable draws with `E exp(iλZ) = exp(-|scale λ|^β)`.
pub fn sample_sym_stable(beta: f64, scale: f64, n: usize, handle: &RngHandle) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n];
    let mut rng = handle.rng();
    fill_sym_stable(beta, scale, &mut out, &mut rng)?;
    Ok(out)
}

/// Symmetric β-stable law with `E exp(iλZ) = exp(-|scale λ|^β)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StableLaw {
    pub beta: f64,
    pub scale: f64,
}

impl StableLaw {
    pub fn new(beta: f64, scale: f64) -> Result<Self> {
        validate_beta(beta)?;
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::param(format!("scale {scale} must be finite and nonnegative")));
        }
        Ok(Self { beta, scale })
    }

    /// One draw from `rng`; repeated calls continue the same stream.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.scale * draw_standard(self.beta, rng)
    }
}

/// `count` i.i.d. draws from the stream of `handle`.
pub fn sample_stable_block(law: &StableLaw, count: usize, handle: &RngHandle) -> Result<Vec<f64>> {
    sample_sym_stable(law.beta, law.scale, count, handle)
}

/// `mean cos(λ x)`, the characteristic function of a symmetric sample.
pub fn empirical_char_fn(samples: &[f64], lambda: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Input("empirical characteristic function of an empty sample".into()));
    }
    let c: Vec<f64> = samples.iter().map(|x| (lambda * x).cos()).collect();
    Ok(crate::stats::pairwise_sum(&c) / samples.len() as f64)
}

/// Characteristic function `exp(-|scale λ|^β)`.
pub fn stable_char_fn(beta: f64, scale: f64, lambda: f64) -> f64 {
    (-(scale * lambda).abs().powf(beta)).exp()
}

/// Density of the Lévy measure of the standard variable: `c_β |r|^{-1-β}`.
pub fn levy_constant(beta: f64) -> f64 {
    statrs::function::gamma::gamma(1.0 + beta) * (std::f64::consts::PI * beta / 2.0).sin() / std::f64::consts::PI
}

//! Even test functions used in the moment conditions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TestFunction {
    /// `exp(-decay x² / 2)`.
    GaussBump { decay: f64 },
    /// `S((|x| - eta) / width) · exp(-decay x² / 2)` with a C^∞ step `S`
    /// that vanishes on `(-∞, 0]` and equals one on `[1, ∞)`.
    SmoothThreshold { eta: f64, width: f64, decay: f64 },
}

impl Default for TestFunction {
    fn default() -> Self {
        TestFunction::GaussBump { decay: 1.0 }
    }
}

fn bump(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

fn bump_d(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp() / (t * t)
    }
}

/// Smooth step and its derivative.
fn step(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0);
    }
    let (a, b) = (bump(t), bump(1.0 - t));
    let s = a + b;
    let da = bump_d(t);
    let db = -bump_d(1.0 - t);
    (a / s, (da * s - a * (da + db)) / (s * s))
}

impl TestFunction {
    pub fn threshold(eta: f64, width: f64, decay: f64) -> Self {
        TestFunction::SmoothThreshold { eta, width, decay }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TestFunction::GaussBump { decay } => {
                if !(decay > 0.0 && decay.is_finite()) {
                    return Err(Error::param("test function decay must be positive"));
                }
            }
            TestFunction::SmoothThreshold { eta, width, decay } => {
                if !(eta > 0.0 && width > 0.0 && decay > 0.0) {
                    return Err(Error::param("threshold, width and decay must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn decay(&self) -> f64 {
        match *self {
            TestFunction::GaussBump { decay } | TestFunction::SmoothThreshold { decay, .. } => decay,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::GaussBump { decay } => (-0.5 * decay * x * x).exp(),
            TestFunction::SmoothThreshold { eta, width, decay } => {
                let (s, _) = step((x.abs() - eta) / width);
                if s == 0.0 {
                    0.0
                } else {
                    s * (-0.5 * decay * x * x).exp()
                }
            }
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match *self {
            TestFunction::GaussBump { decay } => -decay * x * (-0.5 * decay * x * x).exp(),
            TestFunction::SmoothThreshold { eta, width, decay } => {
                let (s, ds) = step((x.abs() - eta) / width);
                let g = (-0.5 * decay * x * x).exp();
                ds / width * x.signum() * g - s * decay * x * g
            }
        }
    }

    /// `x f'(x)`, the integrand of the scale derivative.
    pub fn x_deriv(&self, x: f64) -> f64 {
        x * self.deriv(x)
    }

    pub fn second_derivative_at_zero(&self) -> f64 {
        match *self {
            TestFunction::GaussBump { decay } => -decay,
            TestFunction::SmoothThreshold { .. } => 0.0,
        }
    }

    /// Half-width beyond which the function is below 1e-17 in absolute value.
    pub fn support_radius(&self) -> f64 {
        (2.0 * 40.0 / self.decay()).sqrt()
    }

    /// Lower edge of the flat zero region around the origin.
    pub fn zero_radius(&self) -> f64 {
        match *self {
            TestFunction::GaussBump { .. } => 0.0,
            TestFunction::SmoothThreshold { eta, .. } => eta,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_values() {
        let f = TestFunction::threshold(1.0, 0.5, 1.0);
        assert_eq!(f.eval(0.5), 0.0);
        assert!((f.eval(3.0) - (-4.5f64).exp()).abs() < 1e-15);
        assert!((f.eval(3.0) - 0.011109).abs() < 1e-6);
        assert_eq!(f.eval(-0.99), 0.0);
        assert_eq!(f.second_derivative_at_zero(), 0.0);
        assert_eq!(TestFunction::GaussBump { decay: 1.0 }.second_derivative_at_zero(), -1.0);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for f in [TestFunction::GaussBump { decay: 1.3 }, TestFunction::threshold(1.0, 0.5, 1.0)] {
            for &x in &[-2.0, -1.2, 0.3, 1.1, 1.3, 1.45, 2.5] {
                let h = 1e-6;
                let fd = (f.eval(x + h) - f.eval(x - h)) / (2.0 * h);
                assert!((fd - f.deriv(x)).abs() < 1e-7, "{x}: {fd} {}", f.deriv(x));
            }
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(TestFunction::threshold(0.0, 0.5, 1.0).validate().is_err());
        assert!(TestFunction::GaussBump { decay: -1.0 }.validate().is_err());
    }
}

//! Standard location-scale family primitives.
//!
//! Every supported family is generated from a fixed standard density `f0`:
//! the member with location `mu` and scale `sigma` has density
//! `f0((x - mu)/sigma) / sigma`. This module evaluates the standard density,
//! CDF, quantile, and the partial mean `T(x) = ∫_{-inf}^x t f0(t) dt` that
//! the squared-Wasserstein objective is built from.

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::quad;

/// Euler-Mascheroni constant (mean of the standard Gumbel).
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Gumbel density underflows to exactly zero left of this point.
const GUMBEL_LO: f64 = -7.5;
/// Gumbel tail mass of `t f0(t)` beyond this point is below 1e-16.
const GUMBEL_HI: f64 = 42.0;

/// A standard location-scale family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Normal,
    /// Standard logistic, variance pi^2/3.
    Logistic,
    /// Type I extreme-value distribution, mean gamma, variance pi^2/6.
    Gumbel,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Family::Normal => write!(f, "normal"),
            Family::Logistic => write!(f, "logistic"),
            Family::Gumbel => write!(f, "gumbel"),
        }
    }
}

impl std::str::FromStr for Family {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(Family::Normal),
            "logistic" => Ok(Family::Logistic),
            "gumbel" => Ok(Family::Gumbel),
            other => Err(crate::Error::Parse(format!("unknown family '{other}'"))),
        }
    }
}

impl Family {
    /// Mean of the standard density.
    pub fn mean(self) -> f64 {
        match self {
            Family::Normal | Family::Logistic => 0.0,
            Family::Gumbel => EULER_GAMMA,
        }
    }

    /// Variance of the standard density.
    pub fn variance(self) -> f64 {
        use std::f64::consts::PI;
        match self {
            Family::Normal => 1.0,
            Family::Logistic => PI * PI / 3.0,
            Family::Gumbel => PI * PI / 6.0,
        }
    }

    /// Standard density `f0(x)`.
    pub fn pdf(self, x: f64) -> f64 {
        match self {
            Family::Normal => INV_SQRT_2PI * (-0.5 * x * x).exp(),
            Family::Logistic => {
                // Symmetric; evaluate on the negative side to avoid overflow.
                let e = (-x.abs()).exp();
                let d = 1.0 + e;
                e / (d * d)
            }
            Family::Gumbel => (-x - (-x).exp()).exp(),
        }
    }

    /// `log f0(x)`, finite wherever the density is positive.
    pub fn log_pdf(self, x: f64) -> f64 {
        match self {
            Family::Normal => -0.5 * x * x - LN_SQRT_2PI,
            Family::Logistic => -x.abs() - 2.0 * (-x.abs()).exp().ln_1p(),
            Family::Gumbel => -x - (-x).exp(),
        }
    }

    /// Standard CDF `F0(x)`.
    pub fn cdf(self, x: f64) -> f64 {
        match self {
            Family::Normal => 0.5 * erfc(-x / SQRT_2),
            Family::Logistic => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            Family::Gumbel => (-(-x).exp()).exp(),
        }
    }

    /// Standard quantile `F0^{-1}(t)`. Returns the extended-real limits at
    /// `t = 0` and `t = 1` and NaN outside `[0, 1]`.
    pub fn quantile(self, t: f64) -> f64 {
        if !(0.0..=1.0).contains(&t) {
            return f64::NAN;
        }
        if t == 0.0 {
            return f64::NEG_INFINITY;
        }
        if t == 1.0 {
            return f64::INFINITY;
        }
        match self {
            Family::Normal => -SQRT_2 * erfc_inv(2.0 * t),
            Family::Logistic => t.ln() - (-t).ln_1p(),
            Family::Gumbel => -(-t.ln()).ln(),
        }
    }

    /// Derivative of `log f0` (the score in the standardized variable).
    pub fn score(self, x: f64) -> f64 {
        match self {
            Family::Normal => -x,
            Family::Logistic => -(0.5 * x).tanh(),
            Family::Gumbel => (-x).exp() - 1.0,
        }
    }

    /// Partial mean `T(x) = ∫_{-inf}^x t f0(t) dt` on the extended reals:
    /// `T(-inf) = 0` and `T(+inf)` equals the family mean.
    pub fn partial_mean(self, x: f64) -> f64 {
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        if x == f64::INFINITY {
            return self.mean();
        }
        match self {
            // t f0(t) = -f0'(t), so T(x) = -f0(x).
            Family::Normal => -self.pdf(x),
            Family::Logistic => logistic_partial_mean(x),
            Family::Gumbel => gumbel_partial_mean(x),
        }
    }
}

/// `T(x) = x F0(x) - log(1 + e^x)` for the standard logistic, arranged so
/// both tails underflow to zero instead of overflowing.
fn logistic_partial_mean(x: f64) -> f64 {
    if x <= 0.0 {
        let e = x.exp();
        x * e / (1.0 + e) - e.ln_1p()
    } else {
        let e = (-x).exp();
        -x * e / (1.0 + e) - e.ln_1p()
    }
}

/// Gumbel partial mean by adaptive quadrature of `t f0(t)`. The integrand
/// vanishes (in f64) below `GUMBEL_LO` and its tail above `GUMBEL_HI` is
/// under 1e-16, so the improper integral reduces to a finite interval.
fn gumbel_partial_mean(x: f64) -> f64 {
    if x <= GUMBEL_LO {
        return 0.0;
    }
    if x >= GUMBEL_HI {
        return EULER_GAMMA;
    }
    let f = |t: f64| t * Family::Gumbel.pdf(t);
    quad::adaptive_simpson(&f, GUMBEL_LO, x, 1e-13).unwrap_or_else(|_| {
        // The integrand is smooth and bounded here; depth exhaustion can
        // only leave an estimate a hair above tolerance. Use it.
        quad::adaptive_simpson_best(&f, GUMBEL_LO, x)
    })
}

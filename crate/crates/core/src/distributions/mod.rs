//! Parametric families for sales lag, lifetime, and report delay.
//!
//! Parameterizations are fixed once and used everywhere:
//!
//! * `Exponential(rate)` — mean `1/rate`
//! * `Weibull(scale, shape)` — CDF `1 - exp(-(t/scale)^shape)`
//! * `Lognormal(mu, sigma)` — `ln X ~ Normal(mu, sigma^2)`
//! * `Gamma(shape, scale)` — mean `shape * scale`
//!
//! All values are immutable after construction; randomness flows through an
//! explicitly passed RNG stream.

mod fit;
mod joint;

pub use joint::{bivariate_pdf, JointModel, Structure};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal};
use statrs::function::erf::{erf_inv, erfc};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.8378770664093453;

/// Univariate parametric family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Exponential,
    Weibull,
    Lognormal,
    Gamma,
}

/// Ordered list of real parameters for a family or a joint model.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub values: Vec<f64>,
}

impl ParamSet {
    pub fn new(values: Vec<f64>) -> Self {
        ParamSet { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

impl From<Vec<f64>> for ParamSet {
    fn from(values: Vec<f64>) -> Self {
        ParamSet { values }
    }
}

impl Family {
    pub fn param_count(&self) -> usize {
        match self {
            Family::Exponential => 1,
            Family::Weibull | Family::Lognormal | Family::Gamma => 2,
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Family::Exponential => &["rate"],
            Family::Weibull => &["scale", "shape"],
            Family::Lognormal => &["mu", "sigma"],
            Family::Gamma => &["shape", "scale"],
        }
    }

    /// Checks arity and the positivity constraints of the family.
    pub fn validate(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::InvalidParams(format!(
                "{self} takes {} parameter(s), got {}",
                self.param_count(),
                p.len()
            )));
        }
        let positive = match self {
            // mu may be any real; all other parameters must be positive.
            Family::Lognormal => p[1] > 0.0 && p[0].is_finite(),
            _ => p.iter().all(|&v| v > 0.0),
        };
        if !positive || p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "{self}({}) violates positivity constraints",
                fmt_params(p)
            )));
        }
        Ok(())
    }

    /// Density; zero for `x <= 0`.
    pub fn pdf(&self, p: &[f64], x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.log_pdf(p, x).exp()
    }

    /// Log density; `-inf` for `x <= 0`.
    pub fn log_pdf(&self, p: &[f64], x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match self {
            Family::Exponential => {
                let rate = p[0];
                rate.ln() - rate * x
            }
            Family::Weibull => {
                let (scale, shape) = (p[0], p[1]);
                let z = x / scale;
                shape.ln() - scale.ln() + (shape - 1.0) * z.ln() - z.powf(shape)
            }
            Family::Lognormal => {
                let (mu, sigma) = (p[0], p[1]);
                let z = (x.ln() - mu) / sigma;
                -x.ln() - sigma.ln() - 0.5 * LN_2PI - 0.5 * z * z
            }
            Family::Gamma => {
                let (shape, scale) = (p[0], p[1]);
                (shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()
            }
        }
    }

    /// Distribution function; zero for `x <= 0`.
    pub fn cdf(&self, p: &[f64], x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            Family::Exponential => -(-p[0] * x).exp_m1(),
            Family::Weibull => -(-(x / p[0]).powf(p[1])).exp_m1(),
            Family::Lognormal => normal_cdf((x.ln() - p[0]) / p[1]),
            Family::Gamma => {
                if x.is_infinite() {
                    1.0
                } else {
                    gamma_lr(p[0], x / p[1])
                }
            }
        }
    }

    /// Quantile function, the inverse of [`Family::cdf`] on `(0, 1)`.
    pub fn quantile(&self, p: &[f64], u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!(
                "quantile level must lie in (0, 1), got {u}"
            )));
        }
        Ok(match self {
            Family::Exponential => -(-u).ln_1p() / p[0],
            Family::Weibull => p[0] * (-(-u).ln_1p()).powf(1.0 / p[1]),
            Family::Lognormal => (p[0] + p[1] * normal_quantile(u)).exp(),
            Family::Gamma => gamma_quantile(p[0], p[1], u),
        })
    }

    /// One draw; strictly positive, deterministic given the RNG stream.
    pub fn sample<R: Rng + ?Sized>(&self, p: &[f64], rng: &mut R) -> f64 {
        match self {
            Family::Exponential => {
                let r: f64 = rng.sample(Open01);
                -r.ln() / p[0]
            }
            Family::Weibull => {
                let r: f64 = rng.sample(Open01);
                p[0] * (-r.ln()).powf(1.0 / p[1])
            }
            Family::Lognormal => {
                let z: f64 = rng.sample(StandardNormal);
                (p[0] + p[1] * z).exp()
            }
            Family::Gamma => {
                let g = rand_distr::Gamma::new(p[0], p[1]).expect("validated parameters");
                // Marsaglia-Tsang can return exactly 0.0 for tiny shapes.
                loop {
                    let x = g.sample(rng);
                    if x > 0.0 {
                        return x;
                    }
                }
            }
        }
    }

    /// Complete-data maximum likelihood estimate.
    ///
    /// Two-parameter families need at least two distinct values; otherwise
    /// the likelihood has no interior maximum and [`Error::FitDegenerate`]
    /// is returned.
    pub fn fit(&self, data: &[f64]) -> Result<ParamSet> {
        fit::fit_univariate(*self, data)
    }

    pub fn mean(&self, p: &[f64]) -> f64 {
        match self {
            Family::Exponential => 1.0 / p[0],
            Family::Weibull => p[0] * (ln_gamma(1.0 + 1.0 / p[1])).exp(),
            Family::Lognormal => (p[0] + 0.5 * p[1] * p[1]).exp(),
            Family::Gamma => p[0] * p[1],
        }
    }

    /// Rescales the distribution of the value by `factor` (shape untouched).
    /// Used to start SEM from an inflated-mean point.
    pub fn scale_params(&self, p: &[f64], factor: f64) -> Vec<f64> {
        match self {
            Family::Exponential => vec![p[0] / factor],
            Family::Weibull => vec![p[0] * factor, p[1]],
            Family::Lognormal => vec![p[0] + factor.ln(), p[1]],
            Family::Gamma => vec![p[0], p[1] * factor],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Family::Exponential => "exponential",
            Family::Weibull => "weibull",
            Family::Lognormal => "lognormal",
            Family::Gamma => "gamma",
        };
        f.write_str(name)
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exponential" | "exp" => Ok(Family::Exponential),
            "weibull" => Ok(Family::Weibull),
            "lognormal" | "logn" => Ok(Family::Lognormal),
            "gamma" => Ok(Family::Gamma),
            other => Err(Error::Schema(format!("unknown family `{other}`"))),
        }
    }
}

fn fmt_params(p: &[f64]) -> String {
    p.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile, polished to machine precision by one Newton
/// step on the CDF.
pub fn normal_quantile(u: f64) -> f64 {
    debug_assert!(u > 0.0 && u < 1.0);
    let mut z = std::f64::consts::SQRT_2 * erf_inv(2.0 * u - 1.0);
    let dens = normal_pdf(z);
    if dens > 1e-300 {
        z -= (normal_cdf(z) - u) / dens;
    }
    z
}

/// Gamma quantile by safeguarded Newton on the CDF, Wilson-Hilferty start.
fn gamma_quantile(shape: f64, scale: f64, u: f64) -> f64 {
    let z = normal_quantile(u);
    let c = 1.0 / (9.0 * shape);
    let wh = shape * scale * (1.0 - c + z * c.sqrt()).powi(3);
    let mut x = if wh.is_finite() && wh > 0.0 {
        wh
    } else {
        // Small-shape fallback from the leading CDF term.
        scale * ((u.ln() + shape.ln() + ln_gamma(shape)) / shape).exp()
    };
    let fam = Family::Gamma;
    let p = [shape, scale];
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    for _ in 0..100 {
        let f = fam.cdf(&p, x) - u;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = fam.pdf(&p, x);
        let mut next = if d > 0.0 { x - f / d } else { x };
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * x.max(1e-300) };
        }
        if (next - x).abs() <= 1e-14 * x.abs() || f.abs() < 1e-15 {
            return next;
        }
        x = next;
    }
    x
}

#[cfg(test)]
mod tests;

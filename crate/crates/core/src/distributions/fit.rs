//! Complete-data maximum likelihood fits.
//!
//! Weibull: Newton on the profile shape equation with a bisection fallback,
//! tolerance 1e-10, at most 200 iterations. Gamma: Newton on the digamma
//! equation with method-of-moments initialization. Exponential and lognormal
//! are closed form. Shape/scale searches run on quantities that stay in the
//! domain by construction, so no step can leave it.

use statrs::function::gamma::digamma;

use super::{Family, ParamSet};
use crate::error::{Error, Result};

const MAX_ITER: usize = 200;
const TOL: f64 = 1e-10;

pub(super) fn fit_univariate(fam: Family, data: &[f64]) -> Result<ParamSet> {
    if data.is_empty() {
        return Err(Error::Domain("cannot fit on empty data".into()));
    }
    if data.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain(
            "fit requires strictly positive finite observations".into(),
        ));
    }
    if fam.param_count() == 2 && !has_two_distinct(data) {
        return Err(Error::FitDegenerate(format!(
            "{fam} fit needs at least two distinct values"
        )));
    }

    let n = data.len() as f64;
    let values = match fam {
        Family::Exponential => {
            let sum: f64 = data.iter().sum();
            vec![n / sum]
        }
        Family::Lognormal => {
            let logs: Vec<f64> = data.iter().map(|v| v.ln()).collect();
            let mu = logs.iter().sum::<f64>() / n;
            let var = logs.iter().map(|l| (l - mu) * (l - mu)).sum::<f64>() / n;
            vec![mu, var.sqrt()]
        }
        Family::Weibull => fit_weibull(data)?,
        Family::Gamma => fit_gamma(data)?,
    };
    Ok(ParamSet::new(values))
}

fn has_two_distinct(data: &[f64]) -> bool {
    data.windows(2).any(|w| w[0] != w[1]) || data.iter().any(|&v| v != data[0])
}

/// Weighted mean and variance of `logs` under weights `exp(shape*(l - l_max))`.
fn log_moments(logs: &[f64], l_max: f64, shape: f64) -> (f64, f64, f64) {
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    for &l in logs {
        let w = (shape * (l - l_max)).exp();
        s0 += w;
        s1 += w * l;
    }
    let mean = s1 / s0;
    let mut s2 = 0.0;
    for &l in logs {
        let w = (shape * (l - l_max)).exp();
        s2 += w * (l - mean) * (l - mean);
    }
    (s0, mean, s2 / s0)
}

/// Profile likelihood equation for the Weibull shape:
/// g(b) = 1/b + mean(ln t) - weighted_mean(ln t) with weights t^b.
/// g is strictly decreasing, so the root is unique and bracketable.
fn fit_weibull(data: &[f64]) -> Result<Vec<f64>> {
    let n = data.len() as f64;
    let logs: Vec<f64> = data.iter().map(|v| v.ln()).collect();
    let l_max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let l_bar = logs.iter().sum::<f64>() / n;

    let g = |b: f64| {
        let (_, wmean, _) = log_moments(&logs, l_max, b);
        1.0 / b + l_bar - wmean
    };

    // Moment start: Var(ln T) = pi^2 / (6 b^2).
    let sd_log = (logs.iter().map(|l| (l - l_bar) * (l - l_bar)).sum::<f64>() / n).sqrt();
    let mut b = std::f64::consts::PI / (sd_log * 6.0_f64.sqrt());
    if !b.is_finite() || b <= 0.0 {
        b = 1.0;
    }

    // Establish a sign-change bracket around the start.
    let (mut lo, mut hi);
    if g(b) > 0.0 {
        lo = b;
        hi = b * 2.0;
        let mut tries = 0;
        while g(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
            tries += 1;
            if tries > 200 || !hi.is_finite() {
                return Err(Error::FitDegenerate(
                    "weibull shape equation has no finite root".into(),
                ));
            }
        }
    } else {
        hi = b;
        lo = b * 0.5;
        let mut tries = 0;
        while g(lo) < 0.0 {
            hi = lo;
            lo *= 0.5;
            tries += 1;
            if tries > 200 || lo <= 0.0 {
                return Err(Error::FitDegenerate(
                    "weibull shape equation has no positive root".into(),
                ));
            }
        }
    }

    b = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let (_, wmean, wvar) = log_moments(&logs, l_max, b);
        let gv = 1.0 / b + l_bar - wmean;
        if gv > 0.0 {
            lo = b;
        } else {
            hi = b;
        }
        let slope = -(1.0 / (b * b) + wvar);
        let mut next = b - gv / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let done = (next - b).abs() <= TOL * b.max(1.0) || gv.abs() <= TOL;
        b = next;
        if done {
            break;
        }
    }

    // scale^b = mean(t^b), computed in shifted log space.
    let (s0, _, _) = log_moments(&logs, l_max, b);
    let scale = (l_max + (s0 / n).ln() / b).exp();
    Ok(vec![scale, b])
}

/// Newton on `ln k - digamma(k) = ln(mean) - mean(ln)`, which is strictly
/// decreasing in k with a unique positive root for any nondegenerate sample.
fn fit_gamma(data: &[f64]) -> Result<Vec<f64>> {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let mean_log = data.iter().map(|v| v.ln()).sum::<f64>() / n;
    let s = mean.ln() - mean_log;
    if !(s > 0.0) {
        return Err(Error::FitDegenerate(
            "gamma fit: zero log-moment gap (constant sample)".into(),
        ));
    }

    // Minka's moment-based start.
    let mut k = (3.0 - s + ((s - 3.0) * (s - 3.0) + 24.0 * s).sqrt()) / (12.0 * s);
    if !k.is_finite() || k <= 0.0 {
        k = 0.5 / s;
    }

    let h = |k: f64| k.ln() - digamma(k) - s;
    let (mut lo, mut hi);
    if h(k) > 0.0 {
        lo = k;
        hi = k * 2.0;
        while h(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::FitDegenerate("gamma shape diverged".into()));
            }
        }
    } else {
        hi = k;
        lo = k * 0.5;
        while h(lo) < 0.0 {
            hi = lo;
            lo *= 0.5;
            if lo <= f64::MIN_POSITIVE {
                return Err(Error::FitDegenerate("gamma shape underflowed".into()));
            }
        }
    }

    for _ in 0..MAX_ITER {
        let hv = h(k);
        if hv > 0.0 {
            lo = k;
        } else {
            hi = k;
        }
        let slope = 1.0 / k - trigamma(k);
        let mut next = k - hv / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let done = (next - k).abs() <= TOL * k.max(1.0) || hv.abs() <= TOL;
        k = next;
        if done {
            break;
        }
    }

    Ok(vec![k, mean / k])
}

/// Trigamma via the recurrence into the asymptotic regime.
pub(crate) fn trigamma(x: f64) -> f64 {
    let mut acc = 0.0;
    let mut y = x;
    while y < 6.0 {
        acc += 1.0 / (y * y);
        y += 1.0;
    }
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    // 1/y + 1/(2y^2) + sum of Bernoulli terms.
    acc + inv * (1.0 + inv * (0.5 + inv * (1.0 / 6.0 + inv2 * (-1.0 / 30.0 + inv2 * (1.0 / 42.0 - inv2 / 30.0)))))
}

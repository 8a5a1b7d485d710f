//! Stochastic imputation of the missing-data patterns.
//!
//! Unreturned pairs use acceptance-rejection: an unconstrained draw from
//! the current joint law is rejected only while it falls inside the
//! observability region `{x + t < censor, t < tau}`, which leaves exactly
//! the conditional law of the missing data. The same idea conditions sums
//! and intervals. Right-censored lifetimes avoid rejection entirely via the
//! truncated-quantile transform.

use rand::Rng;

use crate::data::AuxTarget;
use crate::distributions::{Family, JointModel, Structure};
use crate::error::{Error, Result};

/// One unit after the S-step: nothing is censored any more.
#[derive(Debug, Clone, PartialEq)]
pub enum CompletedRecord {
    Pair { x: f64, t: f64 },
    /// Direct-sale unit: only the lifetime exists.
    Lifetime { t: f64 },
    Triple { x: f64, y: f64, t: f64 },
}

/// Output of one S-step: records and auxiliary values in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedDataset {
    pub records: Vec<CompletedRecord>,
    pub aux: Vec<(AuxTarget, f64)>,
    /// Total rejected proposals across all records this cycle.
    pub rejections: u64,
}

/// Region constraint for a three-variable imputation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SumConstraint {
    /// `lo <= x + y + t < hi`.
    In { lo: f64, hi: f64 },
    /// `x + y + t >= c`.
    AtLeast { c: f64 },
}

/// Imputes a missing (sales lag, lifetime) pair for a unit censored at
/// `censor`: the returned pair never satisfies `x + t < censor && t < tau`.
pub fn impute_missing_pair<R: Rng + ?Sized>(
    model: &JointModel,
    censor: f64,
    tau: f64,
    max_attempts: u64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    Ok(impute_missing_pair_counted(model, censor, tau, max_attempts, rng)?.0)
}

pub(crate) fn impute_missing_pair_counted<R: Rng + ?Sized>(
    model: &JointModel,
    censor: f64,
    tau: f64,
    max_attempts: u64,
    rng: &mut R,
) -> Result<((f64, f64), u64)> {
    let mut rejections = 0u64;
    loop {
        let (x, t) = model.sample_pair(rng)?;
        if !(x + t < censor && t < tau) {
            return Ok(((x, t), rejections));
        }
        rejections += 1;
        if rejections >= max_attempts {
            return Err(Error::ImputationStall { censor, attempts: rejections });
        }
    }
}

/// Imputes a lifetime beyond a right-censor time `tc` by the truncated
/// quantile transform `t = F^-1(u + (1 - u) F(tc))`; always exceeds `tc`.
pub fn impute_censored_lifetime<R: Rng + ?Sized>(
    fam: Family,
    params: &[f64],
    tc: f64,
    rng: &mut R,
) -> Result<f64> {
    let f_tc = if tc > 0.0 { fam.cdf(params, tc) } else { 0.0 };
    if f_tc >= 1.0 {
        return Err(Error::ImputationStall { censor: tc, attempts: 0 });
    }
    let u: f64 = rng.sample(rand_distr::Open01);
    let v = u + (1.0 - u) * f_tc;
    if v >= 1.0 {
        return Err(Error::ImputationStall { censor: tc, attempts: 0 });
    }
    fam.quantile(params, v)
}

/// Imputes a value of `fam` conditioned on `[lo, hi)` by acceptance-rejection.
pub fn impute_interval<R: Rng + ?Sized>(
    fam: Family,
    params: &[f64],
    lo: f64,
    hi: f64,
    max_attempts: u64,
    rng: &mut R,
) -> Result<f64> {
    Ok(impute_interval_counted(fam, params, lo, hi, max_attempts, rng)?.0)
}

pub(crate) fn impute_interval_counted<R: Rng + ?Sized>(
    fam: Family,
    params: &[f64],
    lo: f64,
    hi: f64,
    max_attempts: u64,
    rng: &mut R,
) -> Result<(f64, u64)> {
    if !(lo < hi) {
        return Err(Error::Domain(format!("empty interval [{lo}, {hi})")));
    }
    let mut rejections = 0u64;
    loop {
        let v = fam.sample(params, rng);
        if v >= lo && v < hi {
            return Ok((v, rejections));
        }
        rejections += 1;
        if rejections >= max_attempts {
            return Err(Error::ImputationStall { censor: lo, attempts: rejections });
        }
    }
}

/// Imputes a (sales lag, report delay, lifetime) triple conditioned on its
/// sum falling in the constraint region.
pub fn impute_triple<R: Rng + ?Sized>(
    model: &JointModel,
    constraint: SumConstraint,
    max_attempts: u64,
    rng: &mut R,
) -> Result<(f64, f64, f64)> {
    Ok(impute_triple_counted(model, constraint, max_attempts, rng)?.0)
}

pub(crate) fn impute_triple_counted<R: Rng + ?Sized>(
    model: &JointModel,
    constraint: SumConstraint,
    max_attempts: u64,
    rng: &mut R,
) -> Result<((f64, f64, f64), u64)> {
    if let SumConstraint::In { lo, hi } = constraint {
        if !(lo < hi) {
            return Err(Error::Domain(format!("empty interval [{lo}, {hi})")));
        }
    }
    let mut rejections = 0u64;
    loop {
        let (x, y, t) = model.sample_triple(rng)?;
        let sum = x + y + t;
        let accept = match constraint {
            SumConstraint::In { lo, hi } => sum >= lo && sum < hi,
            SumConstraint::AtLeast { c } => sum >= c,
        };
        if accept {
            return Ok(((x, y, t), rejections));
        }
        rejections += 1;
        if rejections >= max_attempts {
            let censor = match constraint {
                SumConstraint::In { lo, .. } => lo,
                SumConstraint::AtLeast { c } => c,
            };
            return Err(Error::ImputationStall { censor, attempts: rejections });
        }
    }
}

/// Marginal family of one auxiliary target under an independent structure.
pub(crate) fn aux_family(structure: &Structure, target: AuxTarget) -> Result<(Family, usize, usize)> {
    // Returns (family, offset, len) into the flat parameter vector.
    match structure {
        Structure::IndependentXt { fam_x, .. } => match target {
            AuxTarget::SalesLag => Ok((*fam_x, 0, fam_x.param_count())),
            AuxTarget::ReportDelay => Err(Error::Schema(
                "report-delay data requires the three-variable scheme".into(),
            )),
        },
        Structure::IndependentXyt { fam_x, fam_y, .. } => match target {
            AuxTarget::SalesLag => Ok((*fam_x, 0, fam_x.param_count())),
            AuxTarget::ReportDelay => {
                Ok((*fam_y, fam_x.param_count(), fam_y.param_count()))
            }
        },
        Structure::BivariateLognormal => Err(Error::Schema(
            "auxiliary samples require independent component families".into(),
        )),
    }
}

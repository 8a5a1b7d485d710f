//! Standard errors from the missing information principle.
//!
//! The observed-data information at the estimate is approximated by Monte
//! Carlo: impute the missing data M times at the estimate, evaluate the
//! complete-data score S and negative Hessian B on each completion, and
//! combine
//!
//! ```text
//! I_hat = mean(B) - mean(S S') + mean(S) mean(S)'
//! ```
//!
//! With no missing data every completion is identical and the variance
//! terms cancel, leaving the complete-data curvature. Derivatives are
//! central finite differences on the natural scale; exact formulas exist
//! for the exponential family and serve as test oracles only.
//!
//! Imputations are independent given the estimate and run in parallel over
//! fixed-size chunks; chunk sums combine by pairwise summation, so results
//! do not depend on the worker count.

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;

use crate::data::FieldDataset;
use crate::distributions::{normal_quantile, ParamSet, Structure};
use crate::error::{Error, Result};
use crate::rng::{domain, stream};
use crate::sem::{pseudo_q, s_step_with, CompletedDataset};

const FD_REL_STEP: f64 = 1e-5;
const MAX_HALVINGS: u32 = 8;
const CHUNK: usize = 256;

/// Approximated observed information at an estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoMatrix {
    /// Symmetric p x p observed-information approximation.
    pub matrix: DMatrix<f64>,
    /// Imputations used (M).
    pub imputations: usize,
    /// Whether the matrix admits a Cholesky factorization. A `false` here
    /// is reported, never papered over: it signals insufficient
    /// information for interval estimation.
    pub positive_definite: bool,
}

/// Per-parameter Wald intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct CiTable {
    pub level: f64,
    pub z: f64,
    pub rows: Vec<CiRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CiRow {
    pub param: String,
    pub estimate: f64,
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
}

impl CiTable {
    /// `param,estimate,se,lower,upper,level` rows.
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "param,estimate,se,lower,upper,level")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.param, r.estimate, r.se, r.lower, r.upper, self.level
            )?;
        }
        Ok(())
    }
}

/// Finite-difference step for coordinate `j` that keeps both evaluation
/// points inside the parameter domain, shrinking at most 8 times.
fn fd_step(structure: &Structure, theta: &[f64], j: usize) -> Result<f64> {
    let mut h = FD_REL_STEP * theta[j].abs().max(1.0);
    for _ in 0..=MAX_HALVINGS {
        let mut plus = theta.to_vec();
        plus[j] += h;
        let mut minus = theta.to_vec();
        minus[j] -= h;
        if structure.validate(&plus).is_ok() && structure.validate(&minus).is_ok() {
            return Ok(h);
        }
        h *= 0.5;
    }
    Err(Error::Domain(format!(
        "finite-difference step for parameter {j} left the domain after {MAX_HALVINGS} halvings"
    )))
}

/// Gradient of the complete-data log-likelihood at `theta`.
pub fn complete_score(
    theta: &ParamSet,
    completed: &CompletedDataset,
    structure: &Structure,
) -> Result<Vec<f64>> {
    let t = theta.as_slice();
    let mut score = Vec::with_capacity(t.len());
    for j in 0..t.len() {
        let h = fd_step(structure, t, j)?;
        let mut plus = t.to_vec();
        plus[j] += h;
        let mut minus = t.to_vec();
        minus[j] -= h;
        let qp = pseudo_q(&ParamSet::new(plus), completed, structure)?;
        let qm = pseudo_q(&ParamSet::new(minus), completed, structure)?;
        score.push((qp - qm) / (2.0 * h));
    }
    Ok(score)
}

/// Negative Hessian of the complete-data log-likelihood, symmetrized.
pub fn complete_neg_hessian(
    theta: &ParamSet,
    completed: &CompletedDataset,
    structure: &Structure,
) -> Result<DMatrix<f64>> {
    let t = theta.as_slice();
    let p = t.len();
    let mut raw = DMatrix::zeros(p, p);
    for j in 0..p {
        let h = fd_step(structure, t, j)?;
        let mut plus = t.to_vec();
        plus[j] += h;
        let mut minus = t.to_vec();
        minus[j] -= h;
        let sp = complete_score(&ParamSet::new(plus), completed, structure)?;
        let sm = complete_score(&ParamSet::new(minus), completed, structure)?;
        for l in 0..p {
            raw[(j, l)] = -(sp[l] - sm[l]) / (2.0 * h);
        }
    }
    Ok(0.5 * (&raw + raw.transpose()))
}

struct Moments {
    b: DMatrix<f64>,
    ss: DMatrix<f64>,
    s: DVector<f64>,
}

impl Moments {
    fn zero(p: usize) -> Self {
        Moments {
            b: DMatrix::zeros(p, p),
            ss: DMatrix::zeros(p, p),
            s: DVector::zeros(p),
        }
    }

    fn absorb(&mut self, score: &[f64], b: DMatrix<f64>) {
        let s = DVector::from_column_slice(score);
        self.ss += &s * s.transpose();
        self.s += s;
        self.b += b;
    }

    fn merge(mut self, other: Moments) -> Moments {
        self.b += other.b;
        self.ss += other.ss;
        self.s += other.s;
        self
    }
}

fn pairwise_merge(mut items: Vec<Moments>) -> Moments {
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut iter = items.into_iter();
        while let Some(a) = iter.next() {
            match iter.next() {
                Some(b) => next.push(a.merge(b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.into_iter().next().expect("at least one chunk")
}

/// Monte Carlo approximation of the observed information at `theta_hat`
/// using `m` imputations of the missing data.
pub fn louis_information(
    theta_hat: &ParamSet,
    dataset: &FieldDataset,
    structure: &Structure,
    m: usize,
    seed: u64,
) -> Result<InfoMatrix> {
    if m == 0 {
        return Err(Error::Domain("at least one imputation is required".into()));
    }
    structure.validate(theta_hat.as_slice())?;
    let model = crate::distributions::JointModel::new(*structure, theta_hat.clone())?;
    let p = theta_hat.len();

    let chunk_results: Vec<Result<Moments>> = (0..m)
        .collect::<Vec<usize>>()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = Moments::zero(p);
            for &i in chunk {
                let completed = s_step_with(dataset, &model, u64::MAX, |record| {
                    stream(seed, domain::INFO, i as u64, record)
                })?;
                let score = complete_score(theta_hat, &completed, structure)?;
                let b = complete_neg_hessian(theta_hat, &completed, structure)?;
                acc.absorb(&score, b);
            }
            Ok(acc)
        })
        .collect();

    let mut chunks = Vec::with_capacity(chunk_results.len());
    for r in chunk_results {
        chunks.push(r?);
    }
    let total = pairwise_merge(chunks);

    let mf = m as f64;
    let mean_s = total.s / mf;
    let info = total.b / mf - total.ss / mf + &mean_s * mean_s.transpose();
    let info = 0.5 * (&info + info.transpose());
    let positive_definite = Cholesky::new(info.clone()).is_some();

    Ok(InfoMatrix {
        matrix: info,
        imputations: m,
        positive_definite,
    })
}

/// Wald intervals from an information matrix: `SE = sqrt(diag(I^-1))`,
/// bounds `estimate +/- z * SE`.
pub fn wald_intervals(
    names: &[String],
    estimate: &ParamSet,
    info: &InfoMatrix,
    level: f64,
) -> Result<CiTable> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    if names.len() != estimate.len() || info.matrix.nrows() != estimate.len() {
        return Err(Error::Domain("dimension mismatch in interval inputs".into()));
    }
    let chol = Cholesky::new(info.matrix.clone()).ok_or_else(|| {
        Error::NotPositiveDefinite(
            "cannot invert the information matrix; increase the imputation count or collect more data"
                .into(),
        )
    })?;
    let cov = chol.inverse();
    let z = normal_quantile(0.5 * (1.0 + level));
    let rows = names
        .iter()
        .zip(estimate.as_slice())
        .enumerate()
        .map(|(j, (name, &est))| {
            let se = cov[(j, j)].sqrt();
            CiRow {
                param: name.clone(),
                estimate: est,
                se,
                lower: est - z * se,
                upper: est + z * se,
            }
        })
        .collect();
    Ok(CiTable { level, z, rows })
}

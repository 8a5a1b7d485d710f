//! Joint laws of (sales lag, lifetime) and (sales lag, report delay, lifetime).

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Family, ParamSet, LN_2PI};
use crate::error::{Error, Result};

/// Dependence structure of the joint model.
///
/// Parameter vectors are flat: independent structures concatenate the
/// component families in declaration order (x, then y for the
/// three-variable case, then t); the bivariate lognormal uses
/// `[mu1, mu2, sigma11, sigma22, sigma12]` for `(ln X, ln T)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    IndependentXt { fam_x: Family, fam_t: Family },
    BivariateLognormal,
    IndependentXyt { fam_x: Family, fam_y: Family, fam_t: Family },
}

impl Structure {
    /// Number of coordinates of one observation (2 or 3).
    pub fn dim(&self) -> usize {
        match self {
            Structure::IndependentXyt { .. } => 3,
            _ => 2,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Structure::IndependentXt { fam_x, fam_t } => {
                fam_x.param_count() + fam_t.param_count()
            }
            Structure::BivariateLognormal => 5,
            Structure::IndependentXyt { fam_x, fam_y, fam_t } => {
                fam_x.param_count() + fam_y.param_count() + fam_t.param_count()
            }
        }
    }

    /// Namespaced parameter names, e.g. `x.rate`, `t.scale`, `sigma12`.
    pub fn param_names(&self) -> Vec<String> {
        match self {
            Structure::IndependentXt { fam_x, fam_t } => {
                let mut names = prefixed("x", fam_x);
                names.extend(prefixed("t", fam_t));
                names
            }
            Structure::BivariateLognormal => ["mu1", "mu2", "sigma11", "sigma22", "sigma12"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            Structure::IndependentXyt { fam_x, fam_y, fam_t } => {
                let mut names = prefixed("x", fam_x);
                names.extend(prefixed("y", fam_y));
                names.extend(prefixed("t", fam_t));
                names
            }
        }
    }

    pub fn validate(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::InvalidParams(format!(
                "structure takes {} parameters, got {}",
                self.param_count(),
                p.len()
            )));
        }
        match self {
            Structure::IndependentXt { fam_x, fam_t } => {
                let (px, pt) = p.split_at(fam_x.param_count());
                fam_x.validate(px)?;
                fam_t.validate(pt)
            }
            Structure::BivariateLognormal => {
                let (s11, s22, s12) = (p[2], p[3], p[4]);
                if !p.iter().all(|v| v.is_finite()) {
                    return Err(Error::InvalidParams("non-finite parameter".into()));
                }
                if s11 <= 0.0 || s22 <= 0.0 || s11 * s22 - s12 * s12 <= 0.0 {
                    return Err(Error::InvalidParams(format!(
                        "covariance ({s11}, {s22}, {s12}) is not positive definite"
                    )));
                }
                Ok(())
            }
            Structure::IndependentXyt { fam_x, fam_y, fam_t } => {
                let (px, rest) = p.split_at(fam_x.param_count());
                let (py, pt) = rest.split_at(fam_y.param_count());
                fam_x.validate(px)?;
                fam_y.validate(py)?;
                fam_t.validate(pt)
            }
        }
    }

    /// Splits a flat parameter vector into per-component slices
    /// (x, optional y, t). Only meaningful for independent structures.
    pub fn components<'a>(&self, p: &'a [f64]) -> (&'a [f64], Option<&'a [f64]>, &'a [f64]) {
        match self {
            Structure::IndependentXt { fam_x, .. } => {
                let (px, pt) = p.split_at(fam_x.param_count());
                (px, None, pt)
            }
            Structure::IndependentXyt { fam_x, fam_y, .. } => {
                let (px, rest) = p.split_at(fam_x.param_count());
                let (py, pt) = rest.split_at(fam_y.param_count());
                (px, Some(py), pt)
            }
            Structure::BivariateLognormal => (p, None, p),
        }
    }

    /// Complete-data MLE for two-variable structures.
    ///
    /// Independent structures delegate to the univariate fits; the bivariate
    /// lognormal uses closed-form log-moment estimates with the population
    /// covariance.
    pub fn fit_pairs(&self, pairs: &[(f64, f64)]) -> Result<ParamSet> {
        match self {
            Structure::IndependentXt { fam_x, fam_t } => {
                let xs: Vec<f64> = pairs.iter().map(|r| r.0).collect();
                let ts: Vec<f64> = pairs.iter().map(|r| r.1).collect();
                let mut values = fam_x.fit(&xs)?.values;
                values.extend(fam_t.fit(&ts)?.values);
                Ok(ParamSet::new(values))
            }
            Structure::BivariateLognormal => fit_bivariate_lognormal(pairs),
            Structure::IndependentXyt { .. } => Err(Error::Domain(
                "three-variable structure cannot be fitted on pairs".into(),
            )),
        }
    }

    /// Complete-data MLE for the three-variable structure, componentwise.
    pub fn fit_triples(&self, triples: &[(f64, f64, f64)]) -> Result<ParamSet> {
        match self {
            Structure::IndependentXyt { fam_x, fam_y, fam_t } => {
                let xs: Vec<f64> = triples.iter().map(|r| r.0).collect();
                let ys: Vec<f64> = triples.iter().map(|r| r.1).collect();
                let ts: Vec<f64> = triples.iter().map(|r| r.2).collect();
                let mut values = fam_x.fit(&xs)?.values;
                values.extend(fam_y.fit(&ys)?.values);
                values.extend(fam_t.fit(&ts)?.values);
                Ok(ParamSet::new(values))
            }
            _ => Err(Error::Domain(
                "two-variable structure cannot be fitted on triples".into(),
            )),
        }
    }

    /// Enlarges the location/scale of every component by `factor`,
    /// preserving shapes; the SEM auto-start uses factor 2.
    pub fn inflate_scale(&self, p: &[f64], factor: f64) -> Vec<f64> {
        match self {
            Structure::IndependentXt { fam_x, fam_t } => {
                let (px, pt) = p.split_at(fam_x.param_count());
                let mut values = fam_x.scale_params(px, factor);
                values.extend(fam_t.scale_params(pt, factor));
                values
            }
            Structure::BivariateLognormal => {
                vec![p[0] + factor.ln(), p[1] + factor.ln(), p[2], p[3], p[4]]
            }
            Structure::IndependentXyt { fam_x, fam_y, fam_t } => {
                let (px, rest) = p.split_at(fam_x.param_count());
                let (py, pt) = rest.split_at(fam_y.param_count());
                let mut values = fam_x.scale_params(px, factor);
                values.extend(fam_y.scale_params(py, factor));
                values.extend(fam_t.scale_params(pt, factor));
                values
            }
        }
    }
}

fn prefixed(prefix: &str, fam: &Family) -> Vec<String> {
    fam.param_names()
        .iter()
        .map(|n| format!("{prefix}.{n}"))
        .collect()
}

/// A joint law with validated parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct JointModel {
    structure: Structure,
    params: ParamSet,
}

impl JointModel {
    pub fn new(structure: Structure, params: ParamSet) -> Result<Self> {
        structure.validate(params.as_slice())?;
        Ok(JointModel { structure, params })
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn param_names(&self) -> Vec<String> {
        self.structure.param_names()
    }

    /// Joint log density at a 2- or 3-dimensional point.
    pub fn log_pdf(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.structure.dim() {
            return Err(Error::Domain(format!(
                "point dimension {} does not match structure dimension {}",
                point.len(),
                self.structure.dim()
            )));
        }
        if point.iter().any(|&v| v <= 0.0) {
            return Err(Error::Domain(
                "joint density requires strictly positive coordinates".into(),
            ));
        }
        let p = self.params.as_slice();
        Ok(match self.structure {
            Structure::IndependentXt { fam_x, fam_t } => {
                let (px, pt) = p.split_at(fam_x.param_count());
                fam_x.log_pdf(px, point[0]) + fam_t.log_pdf(pt, point[1])
            }
            Structure::BivariateLognormal => bivariate_lognormal_log_pdf(p, point[0], point[1]),
            Structure::IndependentXyt { fam_x, fam_y, fam_t } => {
                let (px, rest) = p.split_at(fam_x.param_count());
                let (py, pt) = rest.split_at(fam_y.param_count());
                fam_x.log_pdf(px, point[0])
                    + fam_y.log_pdf(py, point[1])
                    + fam_t.log_pdf(pt, point[2])
            }
        })
    }

    /// Unconstrained draw from a two-variable law.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, f64)> {
        let p = self.params.as_slice();
        match self.structure {
            Structure::IndependentXt { fam_x, fam_t } => {
                let (px, pt) = p.split_at(fam_x.param_count());
                Ok((fam_x.sample(px, rng), fam_t.sample(pt, rng)))
            }
            Structure::BivariateLognormal => Ok(bivariate_lognormal_sample(p, rng)),
            Structure::IndependentXyt { .. } => Err(Error::Domain(
                "three-variable structure has no pair sampler".into(),
            )),
        }
    }

    /// Unconstrained draw from the three-variable law.
    pub fn sample_triple<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, f64, f64)> {
        let p = self.params.as_slice();
        match self.structure {
            Structure::IndependentXyt { fam_x, fam_y, fam_t } => {
                let (px, rest) = p.split_at(fam_x.param_count());
                let (py, pt) = rest.split_at(fam_y.param_count());
                Ok((
                    fam_x.sample(px, rng),
                    fam_y.sample(py, rng),
                    fam_t.sample(pt, rng),
                ))
            }
            _ => Err(Error::Domain(
                "two-variable structure has no triple sampler".into(),
            )),
        }
    }

    pub fn with_params(&self, params: ParamSet) -> Result<Self> {
        JointModel::new(self.structure, params)
    }
}

/// Bivariate lognormal density; zero off the positive quadrant.
pub fn bivariate_pdf(p: &[f64], x: f64, t: f64) -> f64 {
    if x <= 0.0 || t <= 0.0 {
        0.0
    } else {
        bivariate_lognormal_log_pdf(p, x, t).exp()
    }
}

/// Bivariate normal log density on (ln x, ln t) minus the Jacobian terms.
pub(crate) fn bivariate_lognormal_log_pdf(p: &[f64], x: f64, t: f64) -> f64 {
    let (mu1, mu2, s11, s22, s12) = (p[0], p[1], p[2], p[3], p[4]);
    let det = s11 * s22 - s12 * s12;
    let u = x.ln() - mu1;
    let v = t.ln() - mu2;
    let quad = (s22 * u * u - 2.0 * s12 * u * v + s11 * v * v) / det;
    -LN_2PI - 0.5 * det.ln() - 0.5 * quad - x.ln() - t.ln()
}

/// Draw via the Cholesky factor of the log-scale covariance.
fn bivariate_lognormal_sample<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> (f64, f64) {
    let (mu1, mu2, s11, s22, s12) = (p[0], p[1], p[2], p[3], p[4]);
    let l11 = s11.sqrt();
    let l21 = s12 / l11;
    let l22 = (s22 - l21 * l21).sqrt();
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    ((mu1 + l11 * z1).exp(), (mu2 + l21 * z1 + l22 * z2).exp())
}

fn fit_bivariate_lognormal(pairs: &[(f64, f64)]) -> Result<ParamSet> {
    if pairs.len() < 2 {
        return Err(Error::FitDegenerate(
            "bivariate lognormal fit needs at least two points".into(),
        ));
    }
    let n = pairs.len() as f64;
    let logs: Vec<(f64, f64)> = pairs.iter().map(|&(x, t)| (x.ln(), t.ln())).collect();
    let mu1 = logs.iter().map(|l| l.0).sum::<f64>() / n;
    let mu2 = logs.iter().map(|l| l.1).sum::<f64>() / n;
    let mut s11 = 0.0;
    let mut s22 = 0.0;
    let mut s12 = 0.0;
    for &(lx, lt) in &logs {
        s11 += (lx - mu1) * (lx - mu1);
        s22 += (lt - mu2) * (lt - mu2);
        s12 += (lx - mu1) * (lt - mu2);
    }
    s11 /= n;
    s22 /= n;
    s12 /= n;
    if s11 <= 0.0 || s22 <= 0.0 || s11 * s22 - s12 * s12 <= 0.0 {
        return Err(Error::FitDegenerate(
            "log-scale sample covariance is singular".into(),
        ));
    }
    Ok(ParamSet::new(vec![mu1, mu2, s11, s22, s12]))
}

//! The stochastic EM engine.
//!
//! Each cycle replaces every censored record with a random imputation from
//! its conditional law given the current parameters (S-step), then
//! maximizes the resulting complete-data log-likelihood in closed form or
//! by Newton profile fits (M-step). The estimator averages the parameter
//! trace after a burn-in period; the full trace is kept so callers can
//! judge burn-in sufficiency from a trace plot.
//!
//! Record imputations inside one S-step are independent and draw from
//! per-record substreams keyed by `(seed, cycle, record index)`, so the
//! result does not depend on execution order and large S-steps run in
//! parallel.

mod impute;

pub use impute::{
    impute_censored_lifetime, impute_interval, impute_missing_pair, impute_triple,
    CompletedDataset, CompletedRecord, SumConstraint,
};

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{AuxTarget, FieldDataset, Scheme, UnitRecord};
use crate::distributions::{JointModel, ParamSet, Structure};
use crate::error::{Error, Result};
use crate::rng::{domain, stream};

/// Records-per-step threshold below which the S-step stays sequential.
const PAR_THRESHOLD: usize = 512;

/// SEM run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SemConfig {
    /// Cycles discarded before averaging.
    pub burn_in: usize,
    /// Cycles averaged into the estimate; at least 1.
    pub iterations: usize,
    pub seed: u64,
    /// Budget per record before an acceptance-rejection imputation stalls.
    pub max_reject_attempts: u64,
    /// Starting point; `Auto` fits the observed claims as if complete and
    /// doubles every location/scale so the first cycles reject rarely.
    pub init: Init,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Auto,
    Fixed(ParamSet),
}

impl SemConfig {
    /// Defaults: 100 burn-in cycles, 1000 averaged cycles, 10^6 attempts.
    pub fn new(seed: u64) -> Self {
        SemConfig {
            burn_in: 100,
            iterations: 1000,
            seed,
            max_reject_attempts: 1_000_000,
            init: Init::Auto,
        }
    }

    pub fn with_cycles(mut self, burn_in: usize, iterations: usize) -> Self {
        self.burn_in = burn_in;
        self.iterations = iterations;
        self
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }
}

/// Parameter path of a run: entry `k` is the state after cycle `k`
/// (entry 0 is the starting point), with per-cycle rejection counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SemTrace {
    pub names: Vec<String>,
    pub params: Vec<ParamSet>,
    pub rejections: Vec<u64>,
}

impl SemTrace {
    /// `cycle,<param names...>,rejections` rows.
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        write!(w, "cycle")?;
        for name in &self.names {
            write!(w, ",{name}")?;
        }
        writeln!(w, ",rejections")?;
        for (k, (p, rej)) in self.params.iter().zip(&self.rejections).enumerate() {
            write!(w, "{k}")?;
            for v in &p.values {
                write!(w, ",{v}")?;
            }
            writeln!(w, ",{rej}")?;
        }
        Ok(())
    }
}

/// Result of a SEM run.
#[derive(Debug, Clone, PartialEq)]
pub struct SemEstimate {
    /// Componentwise mean of the post-burn-in trace, natural scale.
    pub estimate: ParamSet,
    pub trace: SemTrace,
    pub structure: Structure,
}

impl SemEstimate {
    pub fn model(&self) -> Result<JointModel> {
        JointModel::new(self.structure, self.estimate.clone())
    }
}

/// Checks that the dataset's scheme can be driven by the model structure.
pub fn check_compatible(scheme: Scheme, structure: &Structure) -> Result<()> {
    let ok = match scheme {
        Scheme::PairXt => structure.dim() == 2,
        // Direct-sale lifetimes enter the M-step alone, which needs
        // componentwise fits; the bivariate law cannot absorb them.
        Scheme::PairXtDirect => matches!(structure, Structure::IndependentXt { .. }),
        Scheme::TripleXyt => matches!(structure, Structure::IndependentXyt { .. }),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Schema(format!(
            "model structure does not support scheme {scheme}"
        )))
    }
}

/// One S-step with substreams minted by `stream_for(record index)`.
/// Auxiliary samples use indices following the unit records.
pub fn s_step_with<F>(
    dataset: &FieldDataset,
    model: &JointModel,
    max_attempts: u64,
    stream_for: F,
) -> Result<CompletedDataset>
where
    F: Fn(u64) -> ChaCha8Rng + Sync,
{
    check_compatible(dataset.scheme, &model.structure())?;

    let impute_record = |(idx, rec): (usize, &UnitRecord)| -> Result<(CompletedRecord, u64)> {
        let mut rng = stream_for(idx as u64);
        match rec {
            UnitRecord::Claim { x, t, .. } => Ok((CompletedRecord::Pair { x: *x, t: *t }, 0)),
            UnitRecord::Unreturned { censor } => {
                let ((x, t), rej) = impute::impute_missing_pair_counted(
                    model,
                    *censor,
                    dataset.tau,
                    max_attempts,
                    &mut rng,
                )?;
                Ok((CompletedRecord::Pair { x, t }, rej))
            }
            UnitRecord::DirectCensored { censor } => {
                let (fam_t, off, len) = lifetime_family(&model.structure())?;
                let t = impute::impute_censored_lifetime(
                    fam_t,
                    &model.params().as_slice()[off..off + len],
                    *censor,
                    &mut rng,
                )?;
                Ok((CompletedRecord::Lifetime { t }, 0))
            }
            UnitRecord::SumClaim { lo, hi } => {
                let ((x, y, t), rej) = impute::impute_triple_counted(
                    model,
                    SumConstraint::In { lo: *lo, hi: *hi },
                    max_attempts,
                    &mut rng,
                )?;
                Ok((CompletedRecord::Triple { x, y, t }, rej))
            }
            UnitRecord::SumUnreturned { censor } => {
                let ((x, y, t), rej) = impute::impute_triple_counted(
                    model,
                    SumConstraint::AtLeast { c: *censor },
                    max_attempts,
                    &mut rng,
                )?;
                Ok((CompletedRecord::Triple { x, y, t }, rej))
            }
        }
    };

    let n_records = dataset.records.len();
    let results: Vec<Result<(CompletedRecord, u64)>> =
        if n_records + dataset.aux.len() >= PAR_THRESHOLD {
            dataset.records.par_iter().enumerate().map(impute_record).collect()
        } else {
            dataset.records.iter().enumerate().map(impute_record).collect()
        };

    let mut records = Vec::with_capacity(n_records);
    let mut rejections = 0u64;
    for r in results {
        let (rec, rej) = r?;
        records.push(rec);
        rejections += rej;
    }

    let mut aux = Vec::with_capacity(dataset.aux.len());
    for (j, sample) in dataset.aux.iter().enumerate() {
        let mut rng = stream_for((n_records + j) as u64);
        let (fam, off, len) = impute::aux_family(&model.structure(), sample.target)?;
        let (v, rej) = impute::impute_interval_counted(
            fam,
            &model.params().as_slice()[off..off + len],
            sample.lo,
            sample.hi,
            max_attempts,
            &mut rng,
        )?;
        aux.push((sample.target, v));
        rejections += rej;
    }

    Ok(CompletedDataset { records, aux, rejections })
}

/// S-step of cycle `cycle` under the crate's seeding scheme.
pub fn s_step(
    dataset: &FieldDataset,
    model: &JointModel,
    seed: u64,
    cycle: u64,
    max_attempts: u64,
) -> Result<CompletedDataset> {
    s_step_with(dataset, model, max_attempts, |record| {
        stream(seed, domain::SEM, cycle, record)
    })
}

fn lifetime_family(structure: &Structure) -> Result<(crate::Family, usize, usize)> {
    match structure {
        Structure::IndependentXt { fam_x, fam_t } => {
            Ok((*fam_t, fam_x.param_count(), fam_t.param_count()))
        }
        Structure::IndependentXyt { fam_x, fam_y, fam_t } => Ok((
            *fam_t,
            fam_x.param_count() + fam_y.param_count(),
            fam_t.param_count(),
        )),
        Structure::BivariateLognormal => Err(Error::Schema(
            "right-censored lifetimes require independent component families".into(),
        )),
    }
}

/// Complete-data MLE on an S-step output.
///
/// Auxiliary values join their target family's column; direct-sale
/// lifetimes join the lifetime column.
pub fn m_step(completed: &CompletedDataset, structure: &Structure) -> Result<ParamSet> {
    match structure {
        Structure::IndependentXt { fam_x, fam_t } => {
            let mut xs = Vec::with_capacity(completed.records.len());
            let mut ts = Vec::with_capacity(completed.records.len());
            for rec in &completed.records {
                match rec {
                    CompletedRecord::Pair { x, t } => {
                        xs.push(*x);
                        ts.push(*t);
                    }
                    CompletedRecord::Lifetime { t } => ts.push(*t),
                    CompletedRecord::Triple { .. } => {
                        return Err(Error::Schema(
                            "triple record under a two-variable structure".into(),
                        ))
                    }
                }
            }
            for &(target, v) in &completed.aux {
                match target {
                    AuxTarget::SalesLag => xs.push(v),
                    AuxTarget::ReportDelay => {
                        return Err(Error::Schema(
                            "report-delay data requires the three-variable scheme".into(),
                        ))
                    }
                }
            }
            let mut values = fam_x.fit(&xs)?.values;
            values.extend(fam_t.fit(&ts)?.values);
            Ok(ParamSet::new(values))
        }
        Structure::BivariateLognormal => {
            let mut pairs = Vec::with_capacity(completed.records.len());
            for rec in &completed.records {
                match rec {
                    CompletedRecord::Pair { x, t } => pairs.push((*x, *t)),
                    _ => {
                        return Err(Error::Schema(
                            "bivariate structure requires full pairs".into(),
                        ))
                    }
                }
            }
            if !completed.aux.is_empty() {
                return Err(Error::Schema(
                    "auxiliary samples require independent component families".into(),
                ));
            }
            structure.fit_pairs(&pairs)
        }
        Structure::IndependentXyt { fam_x, fam_y, fam_t } => {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            let mut ts = Vec::new();
            for rec in &completed.records {
                match rec {
                    CompletedRecord::Triple { x, y, t } => {
                        xs.push(*x);
                        ys.push(*y);
                        ts.push(*t);
                    }
                    _ => {
                        return Err(Error::Schema(
                            "three-variable structure requires triples".into(),
                        ))
                    }
                }
            }
            for &(target, v) in &completed.aux {
                match target {
                    AuxTarget::SalesLag => xs.push(v),
                    AuxTarget::ReportDelay => ys.push(v),
                }
            }
            let mut values = fam_x.fit(&xs)?.values;
            values.extend(fam_y.fit(&ys)?.values);
            values.extend(fam_t.fit(&ts)?.values);
            Ok(ParamSet::new(values))
        }
    }
}

/// Complete-data log-likelihood of `theta` on an S-step output: the sum of
/// the joint log density over all completed records plus the marginal log
/// density of every auxiliary value.
pub fn pseudo_q(theta: &ParamSet, completed: &CompletedDataset, structure: &Structure) -> Result<f64> {
    let model = JointModel::new(*structure, theta.clone())?;
    let mut total = 0.0;
    for rec in &completed.records {
        total += match rec {
            CompletedRecord::Pair { x, t } => model.log_pdf(&[*x, *t])?,
            CompletedRecord::Triple { x, y, t } => model.log_pdf(&[*x, *y, *t])?,
            CompletedRecord::Lifetime { t } => {
                let (fam_t, off, len) = lifetime_family(structure)?;
                let p = &theta.as_slice()[off..off + len];
                if *t <= 0.0 {
                    return Err(Error::Domain("non-positive lifetime".into()));
                }
                fam_t.log_pdf(p, *t)
            }
        };
    }
    for &(target, v) in &completed.aux {
        let (fam, off, len) = impute::aux_family(structure, target)?;
        if v <= 0.0 {
            return Err(Error::Domain("non-positive auxiliary value".into()));
        }
        total += fam.log_pdf(&theta.as_slice()[off..off + len], v);
    }
    Ok(total)
}

/// Automatic starting point: fit the observed claims as if they were
/// complete data, then double every location/scale parameter.
///
/// Sum claims stand in for lifetimes (and, absent auxiliary data, for the
/// other components) via their interval midpoints, which over-states the
/// component means; that is the safe direction for the first cycles.
pub fn auto_init(dataset: &FieldDataset, structure: &Structure) -> Result<ParamSet> {
    let fitted = match structure {
        Structure::IndependentXt { .. } | Structure::BivariateLognormal => {
            let pairs: Vec<(f64, f64)> = dataset
                .records
                .iter()
                .filter_map(|r| match r {
                    UnitRecord::Claim { x, t, .. } => Some((*x, *t)),
                    _ => None,
                })
                .collect();
            structure.fit_pairs(&pairs)?
        }
        Structure::IndependentXyt { fam_x, fam_y, fam_t } => {
            let midpoint = |lo: f64, hi: f64| if hi.is_finite() { 0.5 * (lo + hi) } else { lo + 1.0 };
            let sums: Vec<f64> = dataset
                .records
                .iter()
                .filter_map(|r| match r {
                    UnitRecord::SumClaim { lo, hi } => Some(midpoint(*lo, *hi).max(1e-6)),
                    _ => None,
                })
                .collect();
            let aux_mid = |target: AuxTarget| -> Vec<f64> {
                dataset
                    .aux
                    .iter()
                    .filter(|s| s.target == target)
                    .map(|s| midpoint(s.lo, s.hi).max(1e-6))
                    .collect()
            };
            let mut xs = aux_mid(AuxTarget::SalesLag);
            if xs.is_empty() {
                xs = sums.clone();
            }
            let mut ys = aux_mid(AuxTarget::ReportDelay);
            if ys.is_empty() {
                ys = sums.clone();
            }
            let mut values = fam_x.fit(&xs)?.values;
            values.extend(fam_y.fit(&ys)?.values);
            values.extend(fam_t.fit(&sums)?.values);
            ParamSet::new(values)
        }
    };
    Ok(ParamSet::new(structure.inflate_scale(fitted.as_slice(), 2.0)))
}

/// Runs the SEM algorithm: `burn_in + iterations` cycles of S-step then
/// M-step, recording the full trace; the estimate is the arithmetic mean of
/// the post-burn-in trace. Reproducible bit-for-bit given the seed.
pub fn run_sem(dataset: &FieldDataset, structure: Structure, config: &SemConfig) -> Result<SemEstimate> {
    dataset.ensure_valid()?;
    check_compatible(dataset.scheme, &structure)?;
    if config.iterations == 0 {
        return Err(Error::Domain("at least one post-burn-in cycle is required".into()));
    }

    let theta0 = match &config.init {
        Init::Auto => auto_init(dataset, &structure)?,
        Init::Fixed(p) => {
            structure.validate(p.as_slice())?;
            p.clone()
        }
    };

    let total_cycles = config.burn_in + config.iterations;
    let mut params = Vec::with_capacity(total_cycles + 1);
    let mut rejections = Vec::with_capacity(total_cycles + 1);
    params.push(theta0);
    rejections.push(0);

    for cycle in 1..=total_cycles {
        let step = (|| -> Result<(ParamSet, u64)> {
            let model = JointModel::new(structure, params[cycle - 1].clone())?;
            let completed = s_step(
                dataset,
                &model,
                config.seed,
                cycle as u64,
                config.max_reject_attempts,
            )?;
            let theta = m_step(&completed, &structure)?;
            Ok((theta, completed.rejections))
        })();
        match step {
            Ok((theta, rej)) => {
                params.push(theta);
                rejections.push(rej);
            }
            Err(err) => {
                return Err(Error::AtCycle { cycle, source: Box::new(err) });
            }
        }
    }

    // Mean of entries burn_in+1 ..= burn_in+iterations, natural scale.
    let p_count = structure.param_count();
    let mut mean = vec![0.0; p_count];
    for theta in &params[config.burn_in + 1..] {
        for (m, v) in mean.iter_mut().zip(&theta.values) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= config.iterations as f64;
    }

    Ok(SemEstimate {
        estimate: ParamSet::new(mean),
        trace: SemTrace {
            names: structure.param_names(),
            params,
            rejections,
        },
        structure,
    })
}

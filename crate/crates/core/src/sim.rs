//! Synthetic batches and Monte Carlo bias/RMSE studies.
//!
//! A batch of N units is drawn from a known truth; units failing within
//! warranty before the end-of-study date become claims, the rest are
//! unreturned with the common censor time. Studies fit every batch with the
//! stochastic EM engine and aggregate bias and root-mean-square error per
//! parameter. Replications are embarrassingly parallel with per-replication
//! seeds, and aggregation is order-independent, so reports are identical
//! for any worker count.

use std::path::Path;

use rayon::prelude::*;

use crate::data::config::{KvMap, DEFAULT_BURN_IN, DEFAULT_ITERATIONS, DEFAULT_MAX_REJECT_ATTEMPTS};
use crate::data::{Dependence, FieldDataset, Scheme, UnitRecord};
use crate::distributions::{Family, JointModel, ParamSet, Structure};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, domain, stream};
use crate::sem::{run_sem, Init, SemConfig};

/// One simulation setting: truth, observation window, and SEM controls.
#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub label: String,
    pub truth: JointModel,
    pub n_units: usize,
    pub tau: f64,
    /// End-of-study date (shared censor time of the batch).
    pub t0: f64,
    pub replications: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub iterations: usize,
    pub max_reject_attempts: u64,
    /// Worker cap for the caller; 0 means "use all cores".
    pub threads: usize,
}

impl SimScenario {
    /// Reads a scenario from a `key = value` file.
    ///
    /// Required keys: `label`, `model_x`/`model_t` (or
    /// `dependence = bivariate_lognormal`), `truth`, `tau`, `t0`, `n_units`,
    /// `replications`, `seed`. Optional: `burn_in`, `iterations`,
    /// `max_reject_attempts`, `threads`, `dependence`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut kv = KvMap::from_file(path)?;
        let label = kv.require_raw("label")?;
        let dependence = kv
            .take_parsed::<Dependence>("dependence")?
            .unwrap_or(Dependence::Independent);
        let model_x = kv.take_parsed::<Family>("model_x")?;
        let model_t = kv.take_parsed::<Family>("model_t")?;
        let truth_values = kv.require_values("truth")?;
        let tau = kv.require_months("tau")?;
        let t0 = kv.require_months("t0")?;
        let n_units = kv.require_int::<usize>("n_units")?;
        let replications = kv.require_int::<usize>("replications")?;
        let seed = kv.require_int::<u64>("seed")?;
        let burn_in = kv.take_int::<usize>("burn_in")?.unwrap_or(DEFAULT_BURN_IN);
        let iterations = kv
            .take_int::<usize>("iterations")?
            .unwrap_or(DEFAULT_ITERATIONS);
        let max_reject_attempts = kv
            .take_int::<u64>("max_reject_attempts")?
            .unwrap_or(DEFAULT_MAX_REJECT_ATTEMPTS);
        let threads = kv.take_int::<usize>("threads")?.unwrap_or(0);
        kv.reject_unknown()?;

        let structure = match dependence {
            Dependence::BivariateLognormal => {
                if model_x.is_some() || model_t.is_some() {
                    return Err(Error::Config {
                        key: "model_x".into(),
                        msg: "component families cannot be combined with dependence=bivariate_lognormal"
                            .into(),
                    });
                }
                Structure::BivariateLognormal
            }
            Dependence::Independent => Structure::IndependentXt {
                fam_x: model_x.ok_or_else(|| Error::Config {
                    key: "model_x".into(),
                    msg: "missing required key".into(),
                })?,
                fam_t: model_t.ok_or_else(|| Error::Config {
                    key: "model_t".into(),
                    msg: "missing required key".into(),
                })?,
            },
        };
        let truth = JointModel::new(structure, ParamSet::new(truth_values))?;
        if replications == 0 {
            return Err(Error::Config {
                key: "replications".into(),
                msg: "at least one replication is required".into(),
            });
        }
        if n_units == 0 {
            return Err(Error::Config {
                key: "n_units".into(),
                msg: "at least one unit is required".into(),
            });
        }
        Ok(SimScenario {
            label,
            truth,
            n_units,
            tau,
            t0,
            replications,
            seed,
            burn_in,
            iterations,
            max_reject_attempts,
            threads,
        })
    }

    fn sem_config(&self, seed: u64) -> SemConfig {
        SemConfig {
            burn_in: self.burn_in,
            iterations: self.iterations,
            seed,
            max_reject_attempts: self.max_reject_attempts,
            init: Init::Auto,
        }
    }
}

/// Bias/RMSE summary of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub label: String,
    pub param_names: Vec<String>,
    pub truth: Vec<f64>,
    pub bias: Vec<f64>,
    pub rmse: Vec<f64>,
    /// Per-replication estimates; `None` marks a failed replication
    /// (imputation stall or degenerate fit), which is excluded from the
    /// bias/RMSE aggregates.
    pub estimates: Vec<Option<ParamSet>>,
    pub failures: usize,
    pub replications: usize,
    /// Average empirical missing rate of the generated batches.
    pub mean_missing_rate: f64,
}

impl SimReport {
    /// `scenario,param,truth,bias,rmse,failures,replications` rows.
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "scenario,param,truth,bias,rmse,failures,replications")?;
        for j in 0..self.param_names.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                self.label,
                self.param_names[j],
                self.truth[j],
                self.bias[j],
                self.rmse[j],
                self.failures,
                self.replications
            )?;
        }
        Ok(())
    }
}

/// Draws one synthetic batch: units failing within warranty before `t0`
/// become claims, the rest unreturned at censor time `t0`.
pub fn generate_batch(
    truth: &JointModel,
    n_units: usize,
    tau: f64,
    t0: f64,
    seed: u64,
) -> Result<FieldDataset> {
    if truth.structure().dim() != 2 {
        return Err(Error::Domain(
            "batch generation is defined for two-variable models".into(),
        ));
    }
    let mut records = Vec::with_capacity(n_units);
    for unit in 0..n_units {
        let mut rng = stream(seed, domain::GEN, unit as u64, 0);
        let (x, t) = truth.sample_pair(&mut rng)?;
        if x + t < t0 && t < tau {
            records.push(UnitRecord::Claim { x, t, censor: t0 });
        } else {
            records.push(UnitRecord::Unreturned { censor: t0 });
        }
    }
    Ok(FieldDataset {
        tau,
        scheme: Scheme::PairXt,
        records,
        aux: vec![],
    })
}

/// Runs `replications` rounds of generate-then-fit and aggregates bias and
/// RMSE against the truth. Failed replications are counted, not averaged in.
pub fn run_study(scenario: &SimScenario) -> Result<SimReport> {
    let structure = scenario.truth.structure();
    let truth_values = scenario.truth.params().values.clone();

    let outcomes: Vec<(Option<ParamSet>, f64)> = (0..scenario.replications)
        .into_par_iter()
        .map(|rep| {
            let gen_seed = derive_seed(scenario.seed, domain::STUDY, rep as u64, 0);
            let sem_seed = derive_seed(scenario.seed, domain::STUDY, rep as u64, 1);
            let batch = match generate_batch(
                &scenario.truth,
                scenario.n_units,
                scenario.tau,
                scenario.t0,
                gen_seed,
            ) {
                Ok(b) => b,
                Err(_) => return (None, f64::NAN),
            };
            let missing = batch.missing_rate();
            match run_sem(&batch, structure, &scenario.sem_config(sem_seed)) {
                Ok(est) => (Some(est.estimate), missing),
                Err(_) => (None, missing),
            }
        })
        .collect();

    let estimates: Vec<Option<ParamSet>> = outcomes.iter().map(|(e, _)| e.clone()).collect();
    let successes: Vec<&ParamSet> = estimates.iter().flatten().collect();
    let failures = scenario.replications - successes.len();
    if successes.is_empty() {
        return Err(Error::Study(format!(
            "all {} replications of `{}` failed",
            scenario.replications, scenario.label
        )));
    }

    let p = truth_values.len();
    let k = successes.len() as f64;
    let mut bias = vec![0.0; p];
    let mut rmse = vec![0.0; p];
    for est in &successes {
        for j in 0..p {
            let dev = est.values[j] - truth_values[j];
            bias[j] += dev;
            rmse[j] += dev * dev;
        }
    }
    for j in 0..p {
        bias[j] /= k;
        rmse[j] = (rmse[j] / k).sqrt();
    }
    let rates: Vec<f64> = outcomes.iter().map(|(_, r)| *r).filter(|r| r.is_finite()).collect();
    let mean_missing_rate = rates.iter().sum::<f64>() / rates.len().max(1) as f64;

    Ok(SimReport {
        label: scenario.label.clone(),
        param_names: structure.param_names(),
        truth: truth_values,
        bias,
        rmse,
        estimates,
        failures,
        replications: scenario.replications,
        mean_missing_rate,
    })
}

/// Per-point outcome of a breakdown sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownPoint {
    /// Lifetime scale used at this grid point.
    pub theta: f64,
    pub result: std::result::Result<BreakdownStats, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownStats {
    pub missing_rate: f64,
    pub rel_bias: Vec<f64>,
    pub rel_rmse: Vec<f64>,
    pub failures: usize,
}

/// Sweeps the lifetime scale of an exponential-Weibull scenario; higher
/// scales push the missing rate up. Relative bias and RMSE are normalized
/// by each true value; the missing rate is measured empirically.
pub fn breakdown_sweep(base: &SimScenario, theta_grid: &[f64]) -> Result<Vec<BreakdownPoint>> {
    match base.truth.structure() {
        Structure::IndependentXt { fam_t: Family::Weibull, .. } => {}
        _ => {
            return Err(Error::Domain(
                "breakdown sweep expects an independent model with a Weibull lifetime".into(),
            ))
        }
    }
    let scale_index = base.truth.params().len() - 2;

    let mut out = Vec::with_capacity(theta_grid.len());
    for &theta in theta_grid {
        let mut truth_values = base.truth.params().values.clone();
        truth_values[scale_index] = theta;
        let scenario = SimScenario {
            label: format!("{}_scale_{theta}", base.label),
            truth: base.truth.with_params(ParamSet::new(truth_values.clone()))?,
            ..base.clone()
        };
        let point = match run_study(&scenario) {
            Ok(report) => BreakdownPoint {
                theta,
                result: Ok(BreakdownStats {
                    missing_rate: report.mean_missing_rate,
                    rel_bias: report
                        .bias
                        .iter()
                        .zip(&truth_values)
                        .map(|(b, t)| b / t)
                        .collect(),
                    rel_rmse: report
                        .rmse
                        .iter()
                        .zip(&truth_values)
                        .map(|(r, t)| r / t)
                        .collect(),
                    failures: report.failures,
                }),
            },
            Err(e) => BreakdownPoint { theta, result: Err(e.to_string()) },
        };
        out.push(point);
    }
    Ok(out)
}

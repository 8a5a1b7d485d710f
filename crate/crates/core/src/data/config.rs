//! Run configuration files: `key = value` lines, `#` comments.
//!
//! Unknown keys are rejected so typos cannot silently fall back to
//! defaults, and a resolved (defaults-filled) echo of the configuration is
//! available for every run. The `seed` key is mandatory; there is never a
//! time-based default.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;

use super::Scheme;
use crate::distributions::{Family, Structure};
use crate::error::{Error, Result};

pub const DEFAULT_BURN_IN: usize = 100;
pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_INFO_IMPUTATIONS: usize = 100_000;
pub const DEFAULT_MAX_REJECT_ATTEMPTS: u64 = 1_000_000;

/// Dependence between sales lag and lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dependence {
    Independent,
    BivariateLognormal,
}

impl std::fmt::Display for Dependence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Dependence::Independent => "independent",
            Dependence::BivariateLognormal => "bivariate_lognormal",
        })
    }
}

impl FromStr for Dependence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "independent" => Ok(Dependence::Independent),
            "bivariate_lognormal" => Ok(Dependence::BivariateLognormal),
            other => Err(Error::Schema(format!("unknown dependence `{other}`"))),
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub tau: f64,
    pub scheme: Scheme,
    pub dependence: Dependence,
    pub model_x: Option<Family>,
    pub model_t: Option<Family>,
    pub model_y: Option<Family>,
    pub seed: u64,
    pub burn_in: usize,
    pub iterations: usize,
    pub info_imputations: usize,
    pub max_reject_attempts: u64,
    pub threads: usize,
    /// `None` means the automatic inflated-claims start.
    pub init: Option<Vec<f64>>,
    pub end_of_study_date: Option<NaiveDate>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str_contents(&text)
    }

    pub fn from_str_contents(text: &str) -> Result<Self> {
        let mut kv = KvMap::parse(text)?;

        let tau = kv.require_months("tau")?;
        let scheme: Scheme = kv.require_parsed("scheme")?;
        let dependence = kv
            .take_parsed::<Dependence>("dependence")?
            .unwrap_or(Dependence::Independent);
        let model_x = kv.take_parsed::<Family>("model_x")?;
        let model_t = kv.take_parsed::<Family>("model_t")?;
        let model_y = kv.take_parsed::<Family>("model_y")?;
        let seed = kv.require_int::<u64>("seed")?;
        let burn_in = kv.take_int::<usize>("burn_in")?.unwrap_or(DEFAULT_BURN_IN);
        let iterations = kv
            .take_int::<usize>("iterations")?
            .unwrap_or(DEFAULT_ITERATIONS);
        let info_imputations = kv
            .take_int::<usize>("info_imputations")?
            .unwrap_or(DEFAULT_INFO_IMPUTATIONS);
        let max_reject_attempts = kv
            .take_int::<u64>("max_reject_attempts")?
            .unwrap_or(DEFAULT_MAX_REJECT_ATTEMPTS);
        let threads = kv.take_int::<usize>("threads")?.unwrap_or(0);
        let init = kv.take_values("init")?;
        let end_of_study_date = kv.take_date("end_of_study_date")?;
        kv.reject_unknown()?;

        let config = RunConfig {
            tau,
            scheme,
            dependence,
            model_x,
            model_t,
            model_y,
            seed,
            burn_in,
            iterations,
            info_imputations,
            max_reject_attempts,
            threads,
            init,
            end_of_study_date,
        };
        config.check()?;
        Ok(config)
    }

    fn check(&self) -> Result<()> {
        let cfg_err = |key: &str, msg: &str| {
            Err(Error::Config { key: key.into(), msg: msg.into() })
        };
        if !(self.tau > 0.0) {
            return cfg_err("tau", "warranty limit must be positive");
        }
        if self.iterations == 0 {
            return cfg_err("iterations", "at least one post-burn-in cycle is required");
        }
        if self.max_reject_attempts == 0 {
            return cfg_err("max_reject_attempts", "must be at least 1");
        }
        match self.dependence {
            Dependence::Independent => {
                if self.model_x.is_none() {
                    return cfg_err("model_x", "required for independent models");
                }
                if self.model_t.is_none() {
                    return cfg_err("model_t", "required for independent models");
                }
            }
            Dependence::BivariateLognormal => {
                if self.model_x.is_some() || self.model_t.is_some() || self.model_y.is_some() {
                    return cfg_err(
                        "model_x",
                        "component families cannot be combined with dependence=bivariate_lognormal",
                    );
                }
                if self.scheme == Scheme::TripleXyt {
                    return cfg_err(
                        "dependence",
                        "the three-variable scheme requires independent components",
                    );
                }
            }
        }
        match self.scheme {
            Scheme::TripleXyt => {
                if self.model_y.is_none() {
                    return cfg_err("model_y", "required for the three-variable scheme");
                }
            }
            _ => {
                if self.model_y.is_some() {
                    return cfg_err("model_y", "only valid for the three-variable scheme");
                }
            }
        }
        Ok(())
    }

    /// Joint-model structure implied by the scheme/dependence keys.
    pub fn structure(&self) -> Structure {
        match (self.scheme, self.dependence) {
            (Scheme::TripleXyt, _) => Structure::IndependentXyt {
                fam_x: self.model_x.expect("checked"),
                fam_y: self.model_y.expect("checked"),
                fam_t: self.model_t.expect("checked"),
            },
            (_, Dependence::BivariateLognormal) => Structure::BivariateLognormal,
            (_, Dependence::Independent) => Structure::IndependentXt {
                fam_x: self.model_x.expect("checked"),
                fam_t: self.model_t.expect("checked"),
            },
        }
    }

    /// Defaults-filled `key = value` echo, stable order.
    pub fn resolved(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = vec![
            ("tau".into(), super::fmt_months(self.tau)),
            ("scheme".into(), self.scheme.to_string()),
            ("dependence".into(), self.dependence.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("burn_in".into(), self.burn_in.to_string()),
            ("iterations".into(), self.iterations.to_string()),
            ("info_imputations".into(), self.info_imputations.to_string()),
            ("max_reject_attempts".into(), self.max_reject_attempts.to_string()),
            ("threads".into(), self.threads.to_string()),
            (
                "init".into(),
                match &self.init {
                    None => "auto".into(),
                    Some(v) => join_values(v),
                },
            ),
        ];
        if let Some(f) = self.model_x {
            out.push(("model_x".into(), f.to_string()));
        }
        if let Some(f) = self.model_y {
            out.push(("model_y".into(), f.to_string()));
        }
        if let Some(f) = self.model_t {
            out.push(("model_t".into(), f.to_string()));
        }
        if let Some(d) = self.end_of_study_date {
            out.push(("end_of_study_date".into(), d.format("%Y-%m-%d").to_string()));
        }
        out
    }
}

pub(crate) fn join_values(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Parsed `key = value` file with typed, consume-once access.
pub struct KvMap {
    entries: BTreeMap<String, String>,
}

impl KvMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: lineno + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if entries.insert(key.clone(), value).is_some() {
                return Err(Error::Config { key, msg: "duplicate key".into() });
            }
        }
        Ok(KvMap { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn take_raw(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    pub fn require_raw(&mut self, key: &str) -> Result<String> {
        self.take_raw(key).ok_or_else(|| Error::Config {
            key: key.into(),
            msg: "missing required key".into(),
        })
    }

    pub fn take_parsed<T: FromStr<Err = Error>>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take_raw(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| Error::Config { key: key.into(), msg: e.to_string() }),
        }
    }

    pub fn require_parsed<T: FromStr<Err = Error>>(&mut self, key: &str) -> Result<T> {
        let raw = self.require_raw(key)?;
        raw.parse::<T>()
            .map_err(|e| Error::Config { key: key.into(), msg: e.to_string() })
    }

    pub fn take_int<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take_raw(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| Error::Config {
                key: key.into(),
                msg: format!("`{raw}` is not a valid integer"),
            }),
        }
    }

    pub fn require_int<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let raw = self.require_raw(key)?;
        raw.parse::<T>().map_err(|_| Error::Config {
            key: key.into(),
            msg: format!("`{raw}` is not a valid integer"),
        })
    }

    pub fn take_months(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take_raw(key) {
            None => Ok(None),
            Some(raw) => parse_months(&raw)
                .map(Some)
                .ok_or_else(|| Error::Config {
                    key: key.into(),
                    msg: format!("`{raw}` is not decimal months or `inf`"),
                }),
        }
    }

    pub fn require_months(&mut self, key: &str) -> Result<f64> {
        let raw = self.require_raw(key)?;
        parse_months(&raw).ok_or_else(|| Error::Config {
            key: key.into(),
            msg: format!("`{raw}` is not decimal months or `inf`"),
        })
    }

    /// Comma-separated parameter values; the literal `auto` maps to `None`.
    pub fn take_values(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.take_raw(key) {
            None => Ok(None),
            Some(raw) if raw == "auto" => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map(Some)
                .map_err(|_| Error::Config {
                    key: key.into(),
                    msg: format!("`{raw}` is not a comma-separated list of numbers"),
                }),
        }
    }

    pub fn require_values(&mut self, key: &str) -> Result<Vec<f64>> {
        self.take_values(key)?.ok_or_else(|| Error::Config {
            key: key.into(),
            msg: "missing required key".into(),
        })
    }

    pub fn take_date(&mut self, key: &str) -> Result<Option<NaiveDate>> {
        match self.take_raw(key) {
            None => Ok(None),
            Some(raw) => NaiveDate::parse_from_str(&raw, "%Y-%m-%d")
                .map(Some)
                .map_err(|_| Error::Config {
                    key: key.into(),
                    msg: format!("`{raw}` is not a YYYY-MM-DD date"),
                }),
        }
    }

    pub fn reject_unknown(&self) -> Result<()> {
        if let Some(key) = self.entries.keys().next() {
            return Err(Error::Config {
                key: key.clone(),
                msg: "unknown key".into(),
            });
        }
        Ok(())
    }
}

fn parse_months(raw: &str) -> Option<f64> {
    if raw == "inf" {
        return Some(f64::INFINITY);
    }
    raw.parse::<f64>().ok().filter(|v| !v.is_nan())
}

//! Observation schemes, dataset container, and validation.
//!
//! A unit either produced a fully observed claim or it is missing in one of
//! the coarse patterns below. Unreturned units carry an explicit per-unit
//! censor time (end of study minus shipment date), so single-batch and
//! staggered-shipment data share one representation; single-batch files
//! simply expand a count into identical records.
//!
//! All times are decimal months. An infinite warranty is the literal `inf`.

mod csvio;
pub mod config;

pub use config::{Dependence, RunConfig};
pub use csvio::{load_dataset, write_dataset};

use std::fmt;

use crate::error::{Error, Result};

/// Which observation pattern the dataset follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Claims are (sales lag, lifetime) pairs; everything else is unreturned.
    PairXt,
    /// As `PairXt`, plus direct-sale units whose lifetime is right censored.
    PairXtDirect,
    /// Claims record only an interval for the sum X + Y + T.
    TripleXyt,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scheme::PairXt => "pair_xt",
            Scheme::PairXtDirect => "pair_xt_direct",
            Scheme::TripleXyt => "triple_xyt",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pair_xt" => Ok(Scheme::PairXt),
            "pair_xt_direct" => Ok(Scheme::PairXtDirect),
            "triple_xyt" => Ok(Scheme::TripleXyt),
            other => Err(Error::Schema(format!("unknown scheme `{other}`"))),
        }
    }
}

/// One unit of the fleet.
#[derive(Debug, Clone, PartialEq)]
pub enum UnitRecord {
    /// Observed return: sales lag `x`, lifetime `t`. `censor` is the unit's
    /// observation window (end of study minus shipment); infinite when the
    /// file does not state it.
    Claim { x: f64, t: f64, censor: f64 },
    /// No return before end of study; only the censor time is known.
    Unreturned { censor: f64 },
    /// Direct sale: no sales lag, lifetime right censored at `censor`.
    DirectCensored { censor: f64 },
    /// Return with only the sum X + Y + T known to lie in `[lo, hi)`.
    SumClaim { lo: f64, hi: f64 },
    /// Unreturned unit of the three-variable scheme: X + Y + T >= censor.
    SumUnreturned { censor: f64 },
}

impl UnitRecord {
    pub fn is_claim(&self) -> bool {
        matches!(self, UnitRecord::Claim { .. } | UnitRecord::SumClaim { .. })
    }
}

/// Variable an auxiliary interval-censored sample informs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxTarget {
    SalesLag,
    ReportDelay,
}

impl fmt::Display for AuxTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AuxTarget::SalesLag => "sales_lag",
            AuxTarget::ReportDelay => "report_delay",
        })
    }
}

impl std::str::FromStr for AuxTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sales_lag" => Ok(AuxTarget::SalesLag),
            "report_delay" => Ok(AuxTarget::ReportDelay),
            other => Err(Error::Schema(format!("unknown aux target `{other}`"))),
        }
    }
}

/// Extra interval-censored observation of one variable, collected outside
/// the fleet (e.g. from an older product in the same family).
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliarySample {
    pub target: AuxTarget,
    pub lo: f64,
    pub hi: f64,
}

/// Validated field-return dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDataset {
    /// Warranty limit in months; `f64::INFINITY` for a life warranty.
    pub tau: f64,
    pub scheme: Scheme,
    pub records: Vec<UnitRecord>,
    pub aux: Vec<AuxiliarySample>,
}

/// One validation finding; violations are data, not errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Index into `records` (or `aux`, see message); `None` for
    /// dataset-level findings.
    pub record: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.record {
            Some(i) => write!(f, "record {i}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Key counts and ranges of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub n: usize,
    pub claims: usize,
    pub missing_rate: f64,
    pub tau: f64,
    pub scheme: Scheme,
    pub censor_range: Option<(f64, f64)>,
    pub aux_samples: usize,
}

impl fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "units:        {}", self.n)?;
        writeln!(f, "claims:       {}", self.claims)?;
        writeln!(f, "missing rate: {:.6}", self.missing_rate)?;
        writeln!(f, "tau:          {}", fmt_months(self.tau))?;
        writeln!(f, "scheme:       {}", self.scheme)?;
        match self.censor_range {
            Some((lo, hi)) => writeln!(f, "censor range: [{}, {}]", fmt_months(lo), fmt_months(hi))?,
            None => writeln!(f, "censor range: none")?,
        }
        write!(f, "aux samples:  {}", self.aux_samples)
    }
}

pub(crate) fn fmt_months(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

impl FieldDataset {
    /// Total number of units (auxiliary samples are not units).
    pub fn n(&self) -> usize {
        self.records.len()
    }

    /// Number of observed claims (pair or sum).
    pub fn claims(&self) -> usize {
        self.records.iter().filter(|r| r.is_claim()).count()
    }

    pub fn missing_rate(&self) -> f64 {
        let n = self.n();
        if n == 0 {
            0.0
        } else {
            (n - self.claims()) as f64 / n as f64
        }
    }

    pub fn summary(&self) -> DatasetSummary {
        let censors: Vec<f64> = self
            .records
            .iter()
            .filter_map(|r| match r {
                UnitRecord::Claim { censor, .. } if censor.is_finite() => Some(*censor),
                UnitRecord::Unreturned { censor }
                | UnitRecord::DirectCensored { censor }
                | UnitRecord::SumUnreturned { censor } => Some(*censor),
                _ => None,
            })
            .collect();
        let censor_range = if censors.is_empty() {
            None
        } else {
            Some((
                censors.iter().cloned().fold(f64::INFINITY, f64::min),
                censors.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            ))
        };
        DatasetSummary {
            n: self.n(),
            claims: self.claims(),
            missing_rate: self.missing_rate(),
            tau: self.tau,
            scheme: self.scheme,
            censor_range,
            aux_samples: self.aux.len(),
        }
    }

    /// Checks every observability and ordering constraint.
    ///
    /// Empty result means: every claim satisfies `x + t < censor` and
    /// `t < tau`, every interval is well ordered, all times are positive,
    /// and record kinds match the scheme.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |record: Option<usize>, message: String| {
            out.push(Violation { record, message });
        };

        if !(self.tau > 0.0) {
            push(None, format!("warranty limit must be positive, got {}", self.tau));
        }
        if self.claims() == 0 {
            push(None, "no observed claims".to_string());
        }

        for (i, rec) in self.records.iter().enumerate() {
            let scheme_ok = match (self.scheme, rec) {
                (Scheme::PairXt, UnitRecord::Claim { .. } | UnitRecord::Unreturned { .. }) => true,
                (
                    Scheme::PairXtDirect,
                    UnitRecord::Claim { .. }
                    | UnitRecord::Unreturned { .. }
                    | UnitRecord::DirectCensored { .. },
                ) => true,
                (
                    Scheme::TripleXyt,
                    UnitRecord::SumClaim { .. } | UnitRecord::SumUnreturned { .. },
                ) => true,
                _ => false,
            };
            if !scheme_ok {
                push(Some(i), format!("record kind not allowed under scheme {}", self.scheme));
            }
            match rec {
                UnitRecord::Claim { x, t, censor } => {
                    if !(*x > 0.0) {
                        push(Some(i), format!("sales lag must be positive, got {x}"));
                    }
                    if !(*t > 0.0) {
                        push(Some(i), format!("lifetime must be positive, got {t}"));
                    }
                    if *t >= self.tau {
                        push(Some(i), format!("lifetime exceeds warranty ({t} >= {})", self.tau));
                    }
                    if censor.is_finite() && x + t >= *censor {
                        push(
                            Some(i),
                            format!("claim outside observation window ({x} + {t} >= {censor})"),
                        );
                    }
                }
                UnitRecord::Unreturned { censor } | UnitRecord::SumUnreturned { censor } => {
                    if !(*censor > 0.0) {
                        push(Some(i), format!("censor time must be positive, got {censor}"));
                    }
                }
                UnitRecord::DirectCensored { censor } => {
                    if !(*censor >= 0.0) {
                        push(Some(i), format!("censor time must be nonnegative, got {censor}"));
                    }
                }
                UnitRecord::SumClaim { lo, hi } => {
                    if !(*lo >= 0.0) {
                        push(Some(i), format!("interval start must be nonnegative, got {lo}"));
                    }
                    if !(lo < hi) {
                        push(Some(i), format!("empty interval [{lo}, {hi})"));
                    }
                }
            }
        }

        for (i, aux) in self.aux.iter().enumerate() {
            if !(aux.lo >= 0.0 && aux.lo < aux.hi) {
                push(None, format!("aux sample {i}: empty interval [{}, {})", aux.lo, aux.hi));
            }
            if aux.target == AuxTarget::ReportDelay && self.scheme != Scheme::TripleXyt {
                push(
                    None,
                    format!("aux sample {i}: report-delay data requires the three-variable scheme"),
                );
            }
        }

        out
    }

    /// Validation as a hard error (first violation wins).
    pub fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        match violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::Validation(v.to_string())),
        }
    }
}

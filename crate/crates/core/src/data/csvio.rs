//! Dataset CSV ingestion and export.
//!
//! Schema (header required, in this order):
//!
//! ```text
//! kind,x,t,a,b,censor_c,target[,count]
//! ```
//!
//! Unused fields stay empty. Kinds: `claim`, `unreturned`, `direct_censored`,
//! `sum_claim`, `sum_unreturned`, `aux`. The optional `count` column expands
//! a summary row into that many identical records, so a single-batch file can
//! state `unreturned` once with its count and shared censor time.
//!
//! Times are decimal months. When the run configuration carries
//! `end_of_study_date`, cells may instead hold ISO dates (`YYYY-MM-DD`);
//! they convert to month offsets using 30.4375-day months, with `censor_c`
//! holding the unit's start date (shipment for indirect sales, sale date for
//! direct sales), `x` the sale date, and `t` the failure date.

use std::path::Path;

use chrono::NaiveDate;

use super::config::RunConfig;
use super::{AuxTarget, AuxiliarySample, FieldDataset, Scheme, UnitRecord};
use crate::error::{Error, Result};

const HEADER: [&str; 7] = ["kind", "x", "t", "a", "b", "censor_c", "target"];
const DAYS_PER_MONTH: f64 = 30.4375;

/// Loads and validates a dataset.
///
/// Fails with a line-numbered parse error on malformed rows, a schema error
/// on record kinds inconsistent with the configured scheme, and a validation
/// error if the parsed dataset violates its observability constraints.
pub fn load_dataset(path: &Path, config: &RunConfig) -> Result<FieldDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;

    let headers = reader.headers().map_err(csv_err)?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    let has_count = match cols.len() {
        7 => false,
        8 if cols[7] == "count" => true,
        _ => {
            return Err(Error::Schema(format!(
                "expected header `{}[,count]`, got `{}`",
                HEADER.join(","),
                cols.join(",")
            )))
        }
    };
    if cols[..7] != HEADER {
        return Err(Error::Schema(format!(
            "expected header `{}[,count]`, got `{}`",
            HEADER.join(","),
            cols.join(",")
        )));
    }

    let mut records = Vec::new();
    let mut aux = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| row.get(i).unwrap_or("");
        let ctx = RowCtx { line, end_of_study: config.end_of_study_date };

        let count = if has_count {
            match field(7) {
                "" => 1usize,
                s => s.parse::<usize>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("count `{s}` is not a nonnegative integer"),
                })?,
            }
        } else {
            1
        };

        match field(0) {
            "claim" => {
                let (x, t, censor) = ctx.claim_times(field(1), field(2), field(5))?;
                push_n(&mut records, UnitRecord::Claim { x, t, censor }, count);
            }
            "unreturned" => {
                let censor = ctx.censor_time(field(5), "censor_c")?;
                push_n(&mut records, UnitRecord::Unreturned { censor }, count);
            }
            "direct_censored" => {
                let censor = ctx.censor_time(field(5), "censor_c")?;
                push_n(&mut records, UnitRecord::DirectCensored { censor }, count);
            }
            "sum_claim" => {
                let lo = ctx.months(field(3), "a")?;
                let hi = ctx.months(field(4), "b")?;
                push_n(&mut records, UnitRecord::SumClaim { lo, hi }, count);
            }
            "sum_unreturned" => {
                let censor = ctx.censor_time(field(5), "censor_c")?;
                push_n(&mut records, UnitRecord::SumUnreturned { censor }, count);
            }
            "aux" => {
                let target: AuxTarget = field(6).parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("unknown aux target `{}`", field(6)),
                })?;
                let lo = ctx.months(field(3), "a")?;
                let hi = ctx.months(field(4), "b")?;
                for _ in 0..count {
                    aux.push(AuxiliarySample { target, lo, hi });
                }
            }
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown record kind `{other}`"),
                })
            }
        }
    }

    let dataset = FieldDataset {
        tau: config.tau,
        scheme: config.scheme,
        records,
        aux,
    };

    // Kind/scheme mixing is a schema error, not a mere violation.
    for (i, rec) in dataset.records.iter().enumerate() {
        let ok = match (dataset.scheme, rec) {
            (Scheme::PairXt, UnitRecord::Claim { .. } | UnitRecord::Unreturned { .. }) => true,
            (
                Scheme::PairXtDirect,
                UnitRecord::Claim { .. }
                | UnitRecord::Unreturned { .. }
                | UnitRecord::DirectCensored { .. },
            ) => true,
            (Scheme::TripleXyt, UnitRecord::SumClaim { .. } | UnitRecord::SumUnreturned { .. }) => {
                true
            }
            _ => false,
        };
        if !ok {
            return Err(Error::Schema(format!(
                "record {i} has a kind inconsistent with scheme {}",
                dataset.scheme
            )));
        }
    }

    dataset.ensure_valid()?;
    Ok(dataset)
}

/// Writes a dataset back out in the numeric-months schema (no count
/// compression; one row per record). `load_dataset` of the result under the
/// same configuration reproduces the dataset exactly.
pub fn write_dataset(dataset: &FieldDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(HEADER).map_err(csv_err)?;
    let num = |v: f64| format!("{v}");
    for rec in &dataset.records {
        let row: [String; 7] = match rec {
            UnitRecord::Claim { x, t, censor } => [
                "claim".into(),
                num(*x),
                num(*t),
                String::new(),
                String::new(),
                if censor.is_finite() { num(*censor) } else { String::new() },
                String::new(),
            ],
            UnitRecord::Unreturned { censor } => [
                "unreturned".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                num(*censor),
                String::new(),
            ],
            UnitRecord::DirectCensored { censor } => [
                "direct_censored".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                num(*censor),
                String::new(),
            ],
            UnitRecord::SumClaim { lo, hi } => [
                "sum_claim".into(),
                String::new(),
                String::new(),
                num(*lo),
                num(*hi),
                String::new(),
                String::new(),
            ],
            UnitRecord::SumUnreturned { censor } => [
                "sum_unreturned".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                num(*censor),
                String::new(),
            ],
        };
        w.write_record(&row).map_err(csv_err)?;
    }
    for sample in &dataset.aux {
        let row: [String; 7] = [
            "aux".into(),
            String::new(),
            String::new(),
            num(sample.lo),
            num(sample.hi),
            String::new(),
            sample.target.to_string(),
        ];
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn push_n(records: &mut Vec<UnitRecord>, rec: UnitRecord, count: usize) {
    for _ in 0..count.saturating_sub(1) {
        records.push(rec.clone());
    }
    if count > 0 {
        records.push(rec);
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = match e.position() {
        Some(p) => p.line() as usize,
        None => 0,
    };
    Error::Parse { line, msg: e.to_string() }
}

struct RowCtx {
    line: usize,
    end_of_study: Option<NaiveDate>,
}

impl RowCtx {
    fn parse_cell(&self, cell: &str, name: &str) -> Result<Cell> {
        if cell.is_empty() {
            return Ok(Cell::Empty);
        }
        if cell == "inf" {
            return Ok(Cell::Months(f64::INFINITY));
        }
        if let Ok(v) = cell.parse::<f64>() {
            if v.is_nan() {
                return Err(self.err(name, cell, "not a number"));
            }
            return Ok(Cell::Months(v));
        }
        if let Ok(d) = NaiveDate::parse_from_str(cell, "%Y-%m-%d") {
            if self.end_of_study.is_none() {
                return Err(self.err(
                    name,
                    cell,
                    "ISO dates require `end_of_study_date` in the run configuration",
                ));
            }
            return Ok(Cell::Date(d));
        }
        Err(self.err(name, cell, "expected decimal months, `inf`, or YYYY-MM-DD"))
    }

    fn err(&self, name: &str, cell: &str, msg: &str) -> Error {
        Error::Parse {
            line: self.line,
            msg: format!("column `{name}` value `{cell}`: {msg}"),
        }
    }

    fn months(&self, cell: &str, name: &str) -> Result<f64> {
        match self.parse_cell(cell, name)? {
            Cell::Months(v) => Ok(v),
            Cell::Empty => Err(self.err(name, cell, "value required")),
            Cell::Date(_) => Err(self.err(name, cell, "interval bounds must be numeric months")),
        }
    }

    /// Censor cell: months directly, or the unit's start date.
    fn censor_time(&self, cell: &str, name: &str) -> Result<f64> {
        match self.parse_cell(cell, name)? {
            Cell::Months(v) => Ok(v),
            Cell::Date(start) => Ok(months_between(start, self.end_of_study.unwrap())),
            Cell::Empty => Err(self.err(name, cell, "value required")),
        }
    }

    /// Claim cells: `(x, t, censor)` in months, or `(sale, failure, ship)` dates.
    fn claim_times(&self, x: &str, t: &str, censor: &str) -> Result<(f64, f64, f64)> {
        let cx = self.parse_cell(x, "x")?;
        let ct = self.parse_cell(t, "t")?;
        let cc = self.parse_cell(censor, "censor_c")?;
        match (cx, ct) {
            (Cell::Months(xv), Cell::Months(tv)) => {
                let censor = match cc {
                    Cell::Months(c) => c,
                    Cell::Empty => f64::INFINITY,
                    Cell::Date(ship) => months_between(ship, self.end_of_study.unwrap()),
                };
                Ok((xv, tv, censor))
            }
            (Cell::Date(sale), Cell::Date(failure)) => {
                let ship = match cc {
                    Cell::Date(d) => d,
                    _ => {
                        return Err(self.err(
                            "censor_c",
                            censor,
                            "date-mode claims need the shipment date here",
                        ))
                    }
                };
                Ok((
                    months_between(ship, sale),
                    months_between(sale, failure),
                    months_between(ship, self.end_of_study.unwrap()),
                ))
            }
            _ => Err(self.err("x", x, "x and t must both be months or both be dates")),
        }
    }
}

enum Cell {
    Empty,
    Months(f64),
    Date(NaiveDate),
}

/// Signed month offset between two dates, on a 30.4375-day month.
pub fn months_between(start: NaiveDate, end: NaiveDate) -> f64 {
    let days = end.signed_duration_since(start).num_days() as f64;
    days / DAYS_PER_MONTH
}

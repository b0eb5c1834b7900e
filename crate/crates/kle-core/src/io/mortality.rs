//! Long-format mortality tables.
//!
//! Input rows are `year,age,region,value` with the oldest ages grouped as
//! `110+`.  The parser enforces a complete (year, age, region) grid after
//! filtering — silent gaps or imputation would distort every spectrum
//! downstream — and is insensitive to row order.  Values can be taken as
//! they are or passed through `log1p` at ingest; which scale a death count
//! should be modeled on is a modeling decision, so it is explicit per run.

use std::collections::BTreeMap;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::space::{Blocks, Gram, SpaceSpec};

/// Value transform applied at ingest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Identity,
    Log1p,
}

impl Transform {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Log1p => x.ln_1p(),
        }
    }

    /// Stable identifier recorded in output metadata.
    pub fn id(self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::Log1p => "log1p",
        }
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Transform::Identity),
            "log1p" => Ok(Transform::Log1p),
            other => Err(Error::BadFormat(format!(
                "unknown transform {other:?}; expected identity or log1p"
            ))),
        }
    }
}

/// A complete (year, age, region) grid of values, stored year-by-row with
/// region-major columns: column `q * n_ages + a` holds region `q`, age
/// index `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct MortalityTable {
    years: Vec<i64>,
    ages: Vec<u32>,
    regions: Vec<String>,
    values: DMatrix<f64>,
    transform: Transform,
}

impl MortalityTable {
    pub fn years(&self) -> &[i64] {
        &self.years
    }

    pub fn ages(&self) -> &[u32] {
        &self.ages
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn transform(&self) -> Transform {
        self.transform
    }
}

/// Parses a mortality CSV (header `year,age,region,value`, `#` comments
/// ignored, age `110+` stored as 110).  Rows outside `region_filter` or
/// `year_range` (inclusive) are dropped before the completeness check.
/// Region order is the filter order when a filter is given, otherwise
/// lexicographic — so shuffled input yields an identical table.
pub fn parse_mortality_csv(
    text: &str,
    region_filter: Option<&[String]>,
    year_range: Option<(i64, i64)>,
    transform: Transform,
) -> Result<MortalityTable> {
    let mut header_seen = false;
    let mut cells: BTreeMap<(i64, String, u32), f64> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line != "year,age,region,value" {
                return Err(Error::MalformedRow {
                    line: line_no,
                    message: "expected header year,age,region,value".into(),
                });
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::MalformedRow {
                line: line_no,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let year: i64 = fields[0].parse().map_err(|_| Error::MalformedRow {
            line: line_no,
            message: format!("year {:?} is not an integer", fields[0]),
        })?;
        let age: u32 = if fields[1] == "110+" {
            110
        } else {
            fields[1].parse().map_err(|_| Error::MalformedRow {
                line: line_no,
                message: format!("age {:?} is not an integer or 110+", fields[1]),
            })?
        };
        let region = fields[2].to_string();
        if region.is_empty() {
            return Err(Error::MalformedRow { line: line_no, message: "empty region name".into() });
        }
        let value: f64 = fields[3].parse().map_err(|_| Error::MalformedRow {
            line: line_no,
            message: format!("value {:?} is not a number", fields[3]),
        })?;
        if !value.is_finite() {
            return Err(Error::MalformedRow {
                line: line_no,
                message: format!("value {value} is not finite"),
            });
        }
        if value < 0.0 {
            return Err(Error::NegativeValue { line: line_no, value });
        }
        if let Some(filter) = region_filter {
            if !filter.iter().any(|r| *r == region) {
                continue;
            }
        }
        if let Some((lo, hi)) = year_range {
            if year < lo || year > hi {
                continue;
            }
        }
        if cells.insert((year, region.clone(), age), value).is_some() {
            return Err(Error::DuplicateCell { year, age, region });
        }
    }
    if !header_seen {
        return Err(Error::MalformedRow { line: 0, message: "missing header line".into() });
    }
    if cells.is_empty() {
        return Err(Error::BadFormat("no data rows after filtering".into()));
    }

    let mut years: Vec<i64> = cells.keys().map(|(y, _, _)| *y).collect();
    years.dedup();
    let mut ages: Vec<u32> = cells.keys().map(|(_, _, a)| *a).collect();
    ages.sort_unstable();
    ages.dedup();
    let regions: Vec<String> = match region_filter {
        Some(filter) => filter.to_vec(),
        None => {
            let mut seen: Vec<String> = cells.keys().map(|(_, r, _)| r.clone()).collect();
            seen.sort_unstable();
            seen.dedup();
            seen
        }
    };

    let mut values = DMatrix::zeros(years.len(), regions.len() * ages.len());
    for (yi, year) in years.iter().enumerate() {
        for (qi, region) in regions.iter().enumerate() {
            for (ai, age) in ages.iter().enumerate() {
                match cells.get(&(*year, region.clone(), *age)) {
                    Some(v) => values[(yi, qi * ages.len() + ai)] = transform.apply(*v),
                    None => {
                        return Err(Error::MissingCell {
                            year: *year,
                            age: *age,
                            region: region.clone(),
                        })
                    }
                }
            }
        }
    }
    Ok(MortalityTable { years, ages, regions, values, transform })
}

/// Turns a table into an ensemble: one sample per year with uniform
/// weights, on the Euclidean space of dimension `regions * ages` blocked
/// by region.
pub fn table_to_ensemble(table: &MortalityTable) -> Result<Ensemble> {
    let base_dim = table.ages.len();
    let q = table.regions.len();
    let space = SpaceSpec::new(
        q * base_dim,
        Gram::Identity,
        Some(Blocks { q, base_dim }),
    )?;
    Ensemble::uniform(space, table.values.clone())
}

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::{CovariateKey, Panel, SourceRecord};
use crate::error::{Error, Result, RowError};
use crate::sample::UnitKey;

/// Covariate keys a file may contain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CovariateSchema {
    keys: BTreeSet<CovariateKey>,
}

impl CovariateSchema {
    pub fn new(keys: impl IntoIterator<Item = CovariateKey>) -> Self {
        CovariateSchema {
            keys: keys.into_iter().collect(),
        }
    }

    pub fn contains(&self, key: CovariateKey) -> bool {
        self.keys.contains(&key)
    }
}

impl Default for CovariateSchema {
    fn default() -> Self {
        Self::new(CovariateKey::ALL)
    }
}

fn is_missing(s: &str) -> bool {
    s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan")
}

/// Left-joins a long `country,year,variable,value` file onto `panel`.
///
/// Empty and `NA` values stay missing. Rows for country-years without
/// shares are ignored and counted in the provenance notes.
pub fn load_covariates(panel: &Panel, path: impl AsRef<Path>, schema: &CovariateSchema) -> Result<Panel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let malformed = |message: String| Error::MalformedInput {
        path: path.to_path_buf(),
        message,
    };
    let headers = reader.headers().map_err(|e| malformed(e.to_string()))?.clone();
    let col = |names: &[&str]| {
        headers
            .iter()
            .position(|h| names.iter().any(|n| h.eq_ignore_ascii_case(n)))
            .ok_or_else(|| malformed(format!("header lacks a `{}` column", names[0])))
    };
    let (c_country, c_year, c_var, c_value) = (
        col(&["country"])?,
        col(&["year"])?,
        col(&["variable", "key"])?,
        col(&["value"])?,
    );

    let mut values: BTreeMap<UnitKey, BTreeMap<CovariateKey, f64>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    let mut row_errors = Vec::new();
    let mut n_rows = 0u64;
    let mut orphans = 0u64;
    for record in reader.records() {
        let record = record.map_err(|e| malformed(e.to_string()))?;
        n_rows += 1;
        let line = record.position().map(|p| p.line()).unwrap_or(0);

        let var: CovariateKey = record[c_var].parse()?;
        if !schema.contains(var) {
            return Err(Error::UnknownKey(var.to_string()));
        }
        let Ok(year) = record[c_year].parse::<i32>() else {
            row_errors.push(RowError {
                line,
                message: format!("year `{}` is not an integer", &record[c_year]),
            });
            continue;
        };
        let key = UnitKey::new(&record[c_country], year);
        if !seen.insert((key.clone(), var)) {
            return Err(Error::Duplicate {
                path: path.to_path_buf(),
                key: format!("{key} {var}"),
            });
        }
        let raw = &record[c_value];
        if is_missing(raw) {
            continue;
        }
        let value = match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => {
                row_errors.push(RowError {
                    line,
                    message: format!("{var} value `{raw}` is not a number"),
                });
                continue;
            }
        };
        if var == CovariateKey::DdBinary && value != 0.0 && value != 1.0 {
            row_errors.push(RowError {
                line,
                message: format!("dd_binary must be 0 or 1, got {value}"),
            });
            continue;
        }
        if panel.get(&key).is_none() {
            orphans += 1;
            continue;
        }
        values.entry(key).or_default().insert(var, value);
    }
    if !row_errors.is_empty() {
        return Err(Error::Rows {
            path: path.to_path_buf(),
            rows: row_errors,
        });
    }

    let mut record = SourceRecord::for_bytes("covariates", path, &bytes, n_rows);
    if orphans > 0 {
        record
            .notes
            .push(format!("{orphans} row(s) for country-years without shares ignored"));
    }
    let mut merged = panel.clone();
    for (key, vars) in values {
        for (var, v) in vars {
            merged = merged.with_covariate(&key, var, v)?;
        }
    }
    Ok(merged.with_provenance(record))
}

/// Writes every covariate value of `panel` in the long layout read by
/// [`load_covariates`].
pub fn save_covariates(panel: &Panel, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(super::shares::csv_io)?;
    w.write_record(["country", "year", "variable", "value"])
        .map_err(super::shares::csv_io)?;
    for (key, _) in panel.units() {
        for (var, v) in panel.covariates_of(key).into_iter().flatten() {
            w.write_record([key.country.as_str(), &key.year.to_string(), var.as_str(), &format!("{v:?}")])
                .map_err(super::shares::csv_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

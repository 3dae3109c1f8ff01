use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Panel, SourceRecord};
use crate::distribution::{PercentileDistribution, PERCENTILES, SUM_TOLERANCE};
use crate::error::{Error, Result, RowError};
use crate::sample::UnitKey;

/// How share values are expressed in the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareScale {
    /// Percentages if the column maximum exceeds 1.5, fractions otherwise.
    Auto,
    Fraction,
    Percent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatSpec {
    pub delimiter: u8,
    pub scale: ShareScale,
    pub sum_tolerance: f64,
    /// Caller's description of the income concept, kept in provenance.
    pub series: Option<String>,
}

impl Default for FormatSpec {
    fn default() -> Self {
        FormatSpec {
            delimiter: b',',
            scale: ShareScale::Auto,
            sum_tolerance: SUM_TOLERANCE,
            series: None,
        }
    }
}

const AUTO_PERCENT_THRESHOLD: f64 = 1.5;

struct Columns {
    country: usize,
    year: usize,
    percentile: usize,
    share: usize,
    income: Option<usize>,
}

fn find_columns(headers: &csv::StringRecord, path: &Path) -> Result<Columns> {
    let find = |names: &[&str]| {
        headers
            .iter()
            .position(|h| names.iter().any(|n| h.trim().eq_ignore_ascii_case(n)))
    };
    let need = |names: &[&str]| {
        find(names).ok_or_else(|| Error::MalformedInput {
            path: path.to_path_buf(),
            message: format!("header lacks a `{}` column", names[0]),
        })
    };
    Ok(Columns {
        country: need(&["country"])?,
        year: need(&["year"])?,
        percentile: need(&["percentile"])?,
        share: need(&["share"])?,
        income: find(&["avg_income", "mean_income", "average_income"]),
    })
}

/// Accepts `1`..`100` or the `p49p50` bracket notation.
fn parse_percentile(s: &str) -> Option<usize> {
    let s = s.trim();
    let k = if let Some(rest) = s.strip_prefix('p') {
        let (lo, hi) = rest.split_once('p')?;
        let (lo, hi): (usize, usize) = (lo.parse().ok()?, hi.parse().ok()?);
        (hi == lo + 1).then_some(hi)?
    } else {
        s.parse().ok()?
    };
    (1..=PERCENTILES).contains(&k).then_some(k)
}

struct UnitRows {
    line: u64,
    shares: [Option<f64>; PERCENTILES],
    incomes: [Option<f64>; PERCENTILES],
}

/// Reads a long-format percentile-share file.
///
/// Units with missing percentiles or invalid totals are dropped with a
/// warning; the reasons are kept in the panel's provenance notes.
pub fn load_shares(path: impl AsRef<Path>, spec: &FormatSpec) -> Result<Panel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let malformed = |message: String| Error::MalformedInput {
        path: path.to_path_buf(),
        message,
    };
    let headers = reader.headers().map_err(|e| malformed(e.to_string()))?.clone();
    let cols = find_columns(&headers, path)?;

    let mut units: BTreeMap<UnitKey, UnitRows> = BTreeMap::new();
    let mut row_errors = Vec::new();
    let mut n_rows = 0u64;
    let mut max_share = f64::NEG_INFINITY;
    for record in reader.records() {
        let record = record.map_err(|e| malformed(e.to_string()))?;
        n_rows += 1;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let mut bad = |message: String| row_errors.push(RowError { line, message });

        let country = record[cols.country].to_string();
        if country.is_empty() {
            bad("empty country".into());
            continue;
        }
        let Ok(year) = record[cols.year].parse::<i32>() else {
            bad(format!("year `{}` is not an integer", &record[cols.year]));
            continue;
        };
        let Some(k) = parse_percentile(&record[cols.percentile]) else {
            bad(format!("percentile `{}` is not in 1..=100", &record[cols.percentile]));
            continue;
        };
        let share = match record[cols.share].parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => {
                bad(format!("share `{}` is not a number", &record[cols.share]));
                continue;
            }
        };
        let income = match cols.income.map(|i| &record[i]) {
            None | Some("") => None,
            Some(s) => match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Some(v),
                _ => {
                    bad(format!("average income `{s}` is not a number"));
                    continue;
                }
            },
        };

        let key = UnitKey::new(country, year);
        let unit = units.entry(key.clone()).or_insert_with(|| UnitRows {
            line,
            shares: [None; PERCENTILES],
            incomes: [None; PERCENTILES],
        });
        if unit.shares[k - 1].is_some() {
            return Err(Error::Duplicate {
                path: path.to_path_buf(),
                key: format!("{key} percentile {k}"),
            });
        }
        unit.shares[k - 1] = Some(share);
        unit.incomes[k - 1] = income;
        max_share = max_share.max(share);
    }
    if !row_errors.is_empty() {
        return Err(Error::Rows {
            path: path.to_path_buf(),
            rows: row_errors,
        });
    }

    let mut record = SourceRecord::for_bytes("shares", path, &bytes, n_rows);
    if let Some(series) = &spec.series {
        record.notes.push(format!("series: {series}"));
    }
    let percent = match spec.scale {
        ShareScale::Percent => true,
        ShareScale::Fraction => false,
        ShareScale::Auto => {
            let p = max_share > AUTO_PERCENT_THRESHOLD;
            record.notes.push(format!(
                "shares read as {} (column maximum {max_share})",
                if p { "percentages" } else { "fractions" }
            ));
            p
        }
    };
    let factor = if percent { 0.01 } else { 1.0 };

    let mut dists = BTreeMap::new();
    for (key, rows) in units {
        let missing: Vec<usize> = (1..=PERCENTILES).filter(|&k| rows.shares[k - 1].is_none()).collect();
        if !missing.is_empty() {
            let reason = format!("{} missing percentile(s), first {}", missing.len(), missing[0]);
            note_drop(&mut record, &key, rows.line, &reason);
            continue;
        }
        let shares: Vec<f64> = rows.shares.iter().map(|s| s.unwrap() * factor).collect();
        let incomes: Option<Vec<f64>> = rows.incomes.iter().copied().collect();
        let built = PercentileDistribution::with_tolerance(
            key.country.clone(),
            key.year,
            &shares,
            incomes.clone(),
            spec.sum_tolerance,
        );
        let dist = match (built, incomes.is_some()) {
            (Ok(d), _) => d,
            (Err(_), true) => {
                match PercentileDistribution::with_tolerance(
                    key.country.clone(),
                    key.year,
                    &shares,
                    None,
                    spec.sum_tolerance,
                ) {
                    Ok(d) => {
                        record
                            .notes
                            .push(format!("{key}: average incomes not rank-ordered, ignored"));
                        d
                    }
                    Err(e) => {
                        note_drop(&mut record, &key, rows.line, &e.to_string());
                        continue;
                    }
                }
            }
            (Err(e), false) => {
                note_drop(&mut record, &key, rows.line, &e.to_string());
                continue;
            }
        };
        if dist.was_clamped() {
            record.notes.push(format!("{key}: negative shares clamped to zero"));
        }
        dists.insert(key, dist);
    }
    if dists.is_empty() {
        let first = record
            .notes
            .iter()
            .find(|n| n.starts_with("dropped"))
            .map_or("the file has no data rows", String::as_str);
        return Err(Error::MalformedInput {
            path: path.to_path_buf(),
            message: format!("no valid country-year ({first})"),
        });
    }
    Ok(Panel::from_parts(dists, BTreeMap::new(), vec![record]))
}

fn note_drop(record: &mut SourceRecord, key: &UnitKey, line: u64, reason: &str) {
    log::warn!("dropping {key} (first row on line {line}): {reason}");
    record.notes.push(format!("dropped {key}: {reason}"));
}

/// Writes `panel` in the long layout read by [`load_shares`], with an
/// `avg_income` column when any unit carries incomes.
///
/// Shares are printed in shortest round-trip form, so reloading reproduces
/// them bit for bit.
pub fn save_shares(panel: &Panel, path: impl AsRef<Path>) -> Result<()> {
    let with_incomes = panel.distributions().any(|d| d.mean_incomes().is_some());
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(csv_io)?;
    let mut header = vec!["country", "year", "percentile", "share"];
    if with_incomes {
        header.push("avg_income");
    }
    w.write_record(&header).map_err(csv_io)?;
    for (key, d) in panel.units() {
        for k in 0..PERCENTILES {
            let mut row = vec![
                key.country.clone(),
                key.year.to_string(),
                (k + 1).to_string(),
                format!("{:?}", d.shares()[k]),
            ];
            if with_incomes {
                row.push(d.mean_incomes().map(|m| format!("{:?}", m[k])).unwrap_or_default());
            }
            w.write_record(&row).map_err(csv_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub(super) fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

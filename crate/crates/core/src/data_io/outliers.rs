use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Panel, SourceRecord};
use crate::distribution::{PercentileDistribution, PERCENTILES};
use crate::error::{Error, Result};
use crate::sample::UnitKey;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedUnit {
    pub country: String,
    pub year: i32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub threshold_sd: f64,
    pub excluded_units: Vec<ExcludedUnit>,
    pub excluded_countries: Vec<String>,
    /// Countries observed in a single year, which cannot be tested.
    pub untested_countries: Vec<String>,
}

struct Worst {
    z: f64,
    percentile: usize,
    year: i32,
    share: f64,
    mean: f64,
    sd: f64,
}

fn worst_deviation(units: &[&PercentileDistribution]) -> Option<Worst> {
    let n = units.len() as f64;
    let mut worst: Option<Worst> = None;
    for k in 0..PERCENTILES {
        let mean = units.iter().map(|d| d.shares()[k]).sum::<f64>() / n;
        let sd = (units.iter().map(|d| (d.shares()[k] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        if !(sd > 0.0) {
            continue;
        }
        for d in units {
            let z = (d.shares()[k] - mean).abs() / sd;
            if worst.as_ref().is_none_or(|w| z > w.z) {
                worst = Some(Worst {
                    z,
                    percentile: k + 1,
                    year: d.year(),
                    share: d.shares()[k],
                    mean,
                    sd,
                });
            }
        }
    }
    worst
}

/// Drops every country in which some percentile share lies more than
/// `threshold_sd` standard deviations from that country's mean share for
/// the percentile.
pub fn filter_outliers(panel: &Panel, threshold_sd: f64) -> Result<(Panel, OutlierReport)> {
    if !(threshold_sd > 0.0) {
        return Err(Error::Config(format!(
            "outlier threshold must be positive, got {threshold_sd}"
        )));
    }
    let mut by_country: BTreeMap<&str, Vec<&PercentileDistribution>> = BTreeMap::new();
    for (k, d) in panel.units() {
        by_country.entry(k.country.as_str()).or_default().push(d);
    }
    let mut report = OutlierReport {
        threshold_sd,
        excluded_units: Vec::new(),
        excluded_countries: Vec::new(),
        untested_countries: Vec::new(),
    };
    for (country, units) in &by_country {
        if units.len() < 2 {
            log::info!("{country}: single year, not outlier-tested");
            report.untested_countries.push(country.to_string());
            continue;
        }
        let Some(w) = worst_deviation(units) else { continue };
        if w.z > threshold_sd {
            let reason = format!(
                "percentile {} share {:.6} in {} is {:.2} SD from the country mean {:.6} (SD {:.6})",
                w.percentile, w.share, w.year, w.z, w.mean, w.sd
            );
            log::info!("{country} excluded: {reason}");
            report.excluded_countries.push(country.to_string());
            report.excluded_units.extend(units.iter().map(|d| ExcludedUnit {
                country: country.to_string(),
                year: d.year(),
                reason: reason.clone(),
            }));
        }
    }
    let dropped: std::collections::BTreeSet<&str> =
        report.excluded_countries.iter().map(String::as_str).collect();
    let kept = panel
        .filter(|k: &UnitKey| !dropped.contains(k.country.as_str()))
        .with_provenance(SourceRecord {
            role: "filter".into(),
            path: String::new(),
            sha256: String::new(),
            rows: report.excluded_units.len() as u64,
            notes: vec![format!(
                "outlier filter at {threshold_sd} SD excluded {:?}",
                report.excluded_countries
            )],
        });
    Ok((kept, report))
}

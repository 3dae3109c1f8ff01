//! Five-year democracy panels and the middle-class regressions run on them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_io::{CovariateKey, Panel};
use crate::distribution::{PercentileDistribution, QuantileInterval, PERCENTILES};
use crate::error::{Error, Result};
use crate::frontier::{country_specific_classes, Objective};
use crate::inequality::{gini_from_shares, InequalityKind};
use crate::regression::{panel_fe, standardize, LagSource, PanelSpec, PanelTable, RegressionFit};
use crate::sample::UnitKey;

pub const PERIOD_STEP: i32 = 5;
pub const CONFIDENCE_LEVEL: f64 = 0.90;

/// Name of the middle-class regressor in every fit.
pub const MIDCLASS_NAME: &str = "midclass";
pub const CONTROL_NAMES: [&str; 4] = ["ln_gdp_pc", "gini", "gini_sq", "schooling"];

/// One country-period of the five-year table; every regressor refers to
/// the previous period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiveYearRow {
    pub country: String,
    pub year: i32,
    pub democracy: BTreeMap<CovariateKey, f64>,
    pub lag_democracy: BTreeMap<CovariateKey, f64>,
    pub lag_ln_gdp_pc: f64,
    pub lag_gini: f64,
    pub lag_schooling: f64,
    pub lag_distribution: PercentileDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiveYearTable {
    pub start_year: i32,
    pub end_year: i32,
    pub periods: Vec<i32>,
    pub rows: Vec<FiveYearRow>,
    /// Candidate country-periods lacking a required field.
    pub dropped: usize,
}

/// Rows at `start + 5, start + 10, ... <= end`, each carrying the
/// distribution and controls of the period before.
///
/// A row needs the lagged distribution, lagged `gdp_pc` and `schooling`,
/// and at least one democracy value in the current period.
pub fn build_five_year_panel(panel: &Panel, start_year: i32, end_year: i32) -> Result<FiveYearTable> {
    if end_year < start_year + 2 * PERIOD_STEP {
        return Err(Error::Config(format!(
            "a five-year panel needs end >= start + 10, got {start_year}..{end_year}"
        )));
    }
    let periods: Vec<i32> = (start_year..=end_year).step_by(PERIOD_STEP as usize).collect();
    let mut rows = Vec::new();
    let mut dropped = 0;
    for country in panel.countries() {
        for &t in &periods[1..] {
            let now = UnitKey::new(country, t);
            let lag = UnitKey::new(country, t - PERIOD_STEP);
            let lag_dist = panel.get(&lag);
            let democracy: BTreeMap<CovariateKey, f64> = panel
                .covariates_of(&now)
                .map(|m| m.iter().filter(|(k, _)| k.is_democracy()).map(|(k, v)| (*k, *v)).collect())
                .unwrap_or_default();
            if lag_dist.is_none() && democracy.is_empty() && panel.get(&now).is_none() {
                continue;
            }
            let gdp = panel.covariate(&lag, CovariateKey::GdpPc).filter(|g| *g > 0.0);
            let school = panel.covariate(&lag, CovariateKey::Schooling);
            let (Some(dist), Some(gdp), Some(school), false) = (lag_dist, gdp, school, democracy.is_empty())
            else {
                dropped += 1;
                continue;
            };
            let lag_democracy = panel
                .covariates_of(&lag)
                .map(|m| m.iter().filter(|(k, _)| k.is_democracy()).map(|(k, v)| (*k, *v)).collect())
                .unwrap_or_default();
            rows.push(FiveYearRow {
                country: country.to_string(),
                year: t,
                democracy,
                lag_democracy,
                lag_ln_gdp_pc: gdp.ln(),
                lag_gini: gini_from_shares(dist),
                lag_schooling: school,
                lag_distribution: dist.clone(),
            });
        }
    }
    Ok(FiveYearTable {
        start_year,
        end_year,
        periods,
        rows,
        dropped,
    })
}

/// Fit of the democracy equation for one middle-class regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationFit {
    pub fit: RegressionFit,
    /// Mean and SD used to standardize the regressor.
    pub regressor_mean: f64,
    pub regressor_sd: f64,
    pub n_countries: usize,
    pub n_periods: usize,
}

impl EquationFit {
    pub fn coefficient(&self) -> f64 {
        self.fit.coef(MIDCLASS_NAME).expect("midclass is always estimated")
    }

    pub fn std_error(&self) -> f64 {
        self.fit.se(MIDCLASS_NAME).expect("midclass is always estimated")
    }

    pub fn conf_int(&self, level: f64) -> (f64, f64) {
        let i = self.fit.index_of(MIDCLASS_NAME).expect("midclass is always estimated");
        self.fit.conf_int(i, level)
    }
}

/// `DEM_t = rho DEM_{t-5} + beta z_{t-5} + controls + country + period`,
/// where `z` is `regressor` standardized over the estimation sample.
///
/// `regressor` is aligned with `table.rows`; `None` drops the row.
pub fn fit_democracy(table: &FiveYearTable, key: CovariateKey, regressor: &[Option<f64>]) -> Result<EquationFit> {
    if regressor.len() != table.rows.len() {
        return Err(Error::domain("regressor does not match the table rows"));
    }
    let usable: Vec<(usize, f64, f64, f64)> = table
        .rows
        .iter()
        .zip(regressor)
        .enumerate()
        .filter_map(|(i, (r, x))| Some((i, r.democracy.get(&key).copied()?, r.lag_democracy.get(&key).copied()?, (*x)?)))
        .collect();
    if usable.is_empty() {
        return Err(Error::domain(format!("no rows carry {key} and its lag")));
    }
    let raw: Vec<f64> = usable.iter().map(|u| u.3).collect();
    if raw.iter().all(|&v| v == raw[0]) {
        return Err(Error::DegenerateDesign(format!(
            "{MIDCLASS_NAME} is constant over the estimation sample"
        )));
    }
    let z = standardize(&raw)?;
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let sd = (raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (raw.len() - 1) as f64).sqrt();

    let mut data = PanelTable::default();
    for (&(i, dem, lag, _), zi) in usable.iter().zip(&z) {
        let r = &table.rows[i];
        data.push_row(
            r.country.clone(),
            r.year,
            &[
                ("dem", Some(dem)),
                ("lag_dem", Some(lag)),
                (MIDCLASS_NAME, Some(*zi)),
                ("ln_gdp_pc", Some(r.lag_ln_gdp_pc)),
                ("gini", Some(r.lag_gini)),
                ("gini_sq", Some(r.lag_gini * r.lag_gini)),
                ("schooling", Some(r.lag_schooling)),
            ],
        );
    }
    let mut regs = vec![MIDCLASS_NAME];
    regs.extend(CONTROL_NAMES);
    let spec = PanelSpec {
        lagged_dependent: true,
        lag_source: LagSource::Column("lag_dem".into()),
        ..PanelSpec::new("dem", &regs)
    };
    let fit = panel_fe(&data, &spec)?;
    Ok(EquationFit {
        fit,
        regressor_mean: mean,
        regressor_sd: sd,
        n_countries: data.unit.iter().collect::<BTreeSet<_>>().len(),
        n_periods: data.time.iter().collect::<BTreeSet<_>>().len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub percentile: u32,
    pub coefficient: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl SweepPoint {
    pub fn significant(&self) -> bool {
        self.ci_low > 0.0 || self.ci_high < 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileSweep {
    pub democracy_key: CovariateKey,
    pub level: f64,
    pub points: Vec<SweepPoint>,
    pub n_obs: usize,
    pub n_countries: usize,
    /// Percentiles whose share does not vary over the sample.
    pub skipped: Vec<(u32, String)>,
    /// The sweep applies no multiple-testing correction.
    pub multiple_testing_correction: bool,
}

impl PercentileSweep {
    pub fn significant_count(&self) -> usize {
        self.points.iter().filter(|p| p.significant()).count()
    }

    /// Mean percentile among significantly positive coefficients.
    pub fn mean_positive_percentile(&self) -> Option<f64> {
        let pos: Vec<f64> = self
            .points
            .iter()
            .filter(|p| p.ci_low > 0.0)
            .map(|p| p.percentile as f64)
            .collect();
        (!pos.is_empty()).then(|| pos.iter().sum::<f64>() / pos.len() as f64)
    }

    /// As [`Self::mean_positive_percentile`], weighted by coefficient size.
    pub fn weighted_positive_percentile(&self) -> Option<f64> {
        let (num, den) = self
            .points
            .iter()
            .filter(|p| p.ci_low > 0.0)
            .fold((0.0, 0.0), |(n, d), p| (n + p.coefficient * p.percentile as f64, d + p.coefficient));
        (den > 0.0).then(|| num / den)
    }
}

/// Separate regressions on each percentile's lagged standardized share.
///
/// A percentile whose share is constant over the sample (e.g. zero
/// everywhere) cannot be standardized and is listed in `skipped`.
pub fn percentile_sweep(table: &FiveYearTable, key: CovariateKey) -> Result<PercentileSweep> {
    let fits = (1..=PERCENTILES as u32)
        .into_par_iter()
        .map(|k| {
            let x: Vec<Option<f64>> = table
                .rows
                .iter()
                .map(|r| Some(r.lag_distribution.shares()[k as usize - 1]))
                .collect();
            match fit_democracy(table, key, &x) {
                Ok(f) => Ok((k, Ok(f))),
                Err(Error::DegenerateDesign(msg)) => Ok((k, Err(msg))),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    let (mut n_obs, mut n_countries) = (0, 0);
    for (k, f) in fits {
        match f {
            Ok(f) => {
                let (ci_low, ci_high) = f.conf_int(CONFIDENCE_LEVEL);
                n_obs = n_obs.max(f.fit.n_obs);
                n_countries = n_countries.max(f.n_countries);
                points.push(SweepPoint {
                    percentile: k,
                    coefficient: f.coefficient(),
                    std_error: f.std_error(),
                    ci_low,
                    ci_high,
                });
            }
            Err(msg) => skipped.push((k, msg)),
        }
    }
    if points.is_empty() {
        return Err(Error::DegenerateDesign("no percentile share varies over the sample".into()));
    }
    Ok(PercentileSweep {
        democracy_key: key,
        level: CONFIDENCE_LEVEL,
        points,
        n_obs,
        n_countries,
        skipped,
        multiple_testing_correction: false,
    })
}

/// How the middle class entering the democracy equation is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MidclassDef {
    Interval(QuantileInterval),
    /// Percentiles whose mean income lies in `[lo, hi]` times the median.
    RelativeIncome { lo: f64, hi: f64 },
    /// Each country's own size-`size` class, fixed over time.
    CountrySpecific { size: u32 },
    Percentile(u32),
}

impl fmt::Display for MidclassDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MidclassDef::Interval(iv) => write!(f, "{iv}"),
            MidclassDef::RelativeIncome { lo, hi } => {
                write!(f, "{}-{}% of median", lo * 100.0, hi * 100.0)
            }
            MidclassDef::CountrySpecific { size } => write!(f, "country-specific M={size}"),
            MidclassDef::Percentile(k) => write!(f, "percentile {k}"),
        }
    }
}

fn interval(p: u32, q: u32) -> MidclassDef {
    MidclassDef::Interval(QuantileInterval::new(p, q).expect("fixed interval"))
}

/// Conventional definitions: (20,80), 75-200% of the median, (40,90).
pub fn standard_definitions() -> Vec<MidclassDef> {
    vec![
        interval(20, 80),
        MidclassDef::RelativeIncome { lo: 0.75, hi: 2.0 },
        interval(40, 90),
    ]
}

/// Inequality-insensitive definitions: (65,95), (48,98) and the
/// country-specific classes of size 30 and 50.
pub fn endogenous_definitions() -> Vec<MidclassDef> {
    vec![
        interval(65, 95),
        interval(48, 98),
        MidclassDef::CountrySpecific { size: 30 },
        MidclassDef::CountrySpecific { size: 50 },
    ]
}

/// Frozen country to interval maps, keyed by class size.
pub type ClassMaps = BTreeMap<u32, BTreeMap<String, QuantileInterval>>;

/// Country-specific classes on the Gini of the full annual panel.
pub fn country_class_maps(panel: &Panel, sizes: &[u32], objective: Objective) -> Result<ClassMaps> {
    let sample = panel.cross_section("country-classes", InequalityKind::Gini)?;
    sizes
        .iter()
        .map(|&m| Ok((m, country_specific_classes(&sample, m, objective, None)?.intervals())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemocracyRun {
    pub democracy_key: CovariateKey,
    pub midclass_def: MidclassDef,
    pub equation: EquationFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ComparisonEntry {
    Run(DemocracyRun),
    Skipped { midclass_def: MidclassDef, reason: String },
}

fn regressor_for(table: &FiveYearTable, def: &MidclassDef, maps: &ClassMaps) -> std::result::Result<Vec<Option<f64>>, String> {
    match *def {
        MidclassDef::Interval(iv) => Ok(table.rows.iter().map(|r| Some(r.lag_distribution.interval_share(iv))).collect()),
        MidclassDef::Percentile(k) => {
            if !(1..=PERCENTILES as u32).contains(&k) {
                return Err(format!("percentile {k} is outside 1..=100"));
            }
            Ok(table
                .rows
                .iter()
                .map(|r| Some(r.lag_distribution.shares()[k as usize - 1]))
                .collect())
        }
        MidclassDef::RelativeIncome { lo, hi } => {
            if table.rows.iter().all(|r| r.lag_distribution.mean_incomes().is_none()) {
                return Err("average incomes are not available".into());
            }
            Ok(table
                .rows
                .iter()
                .map(|r| {
                    let d = &r.lag_distribution;
                    d.relative_income_interval(lo, hi).ok().map(|iv| d.interval_share(iv))
                })
                .collect())
        }
        MidclassDef::CountrySpecific { size } => {
            let map = maps
                .get(&size)
                .ok_or_else(|| format!("no country classes computed for M={size}"))?;
            Ok(table
                .rows
                .iter()
                .map(|r| map.get(&r.country).map(|iv| r.lag_distribution.interval_share(*iv)))
                .collect())
        }
    }
}

/// One democracy regression per definition, in the order given.
///
/// A definition whose regressor cannot be built (no average incomes, no
/// country classes for its size) is reported as skipped.
pub fn midclass_comparison(
    table: &FiveYearTable,
    key: CovariateKey,
    definitions: &[MidclassDef],
    maps: &ClassMaps,
) -> Result<Vec<ComparisonEntry>> {
    definitions
        .par_iter()
        .map(|def| match regressor_for(table, def, maps) {
            Err(reason) => {
                log::warn!("{def} skipped: {reason}");
                Ok(ComparisonEntry::Skipped {
                    midclass_def: *def,
                    reason,
                })
            }
            Ok(x) => Ok(ComparisonEntry::Run(DemocracyRun {
                democracy_key: key,
                midclass_def: *def,
                equation: fit_democracy(table, key, &x)?,
            })),
        })
        .collect()
}

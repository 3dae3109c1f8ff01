use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Result};
use clap::Args;
use midclass_core::synthetic::{synthetic_panel, SyntheticPanelConfig};
use midclass_core::{Panel, PercentileDistribution, QuantileInterval};
use serde::Serialize;

use super::{parse_interval, parse_pair};
use crate::input::{load_panel, PanelArgs};
use crate::output::{Cell, OutputDir, Table};
use crate::{row, svg};

/// A class given either by fixed percentiles or by income relative to the
/// median (`rel:lo,hi`, as fractions of the median).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ClassSpec {
    Interval(QuantileInterval),
    Relative { lo: f64, hi: f64 },
}

impl ClassSpec {
    fn share(&self, d: &PercentileDistribution) -> Option<f64> {
        match *self {
            ClassSpec::Interval(iv) => Some(d.interval_share(iv)),
            ClassSpec::Relative { lo, hi } => d.relative_income_interval(lo, hi).ok().map(|iv| d.interval_share(iv)),
        }
    }
}

impl fmt::Display for ClassSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassSpec::Interval(iv) => write!(f, "{iv}"),
            ClassSpec::Relative { lo, hi } => write!(f, "{}-{}% of median", lo * 100.0, hi * 100.0),
        }
    }
}

impl FromStr for ClassSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().strip_prefix("rel:") {
            Some(rest) => {
                let (lo, hi) = parse_pair::<f64>(rest)?;
                if !(0.0 <= lo && lo < hi) {
                    return Err(format!("relative class needs 0 <= lo < hi, got {lo},{hi}"));
                }
                Ok(ClassSpec::Relative { lo, hi })
            }
            None => parse_interval(s).map(ClassSpec::Interval),
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct TimeseriesArgs {
    #[command(flatten)]
    pub panel: PanelArgs,
    /// Use a seeded synthetic annual panel instead of --input
    #[arg(long)]
    pub simulate: bool,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Classes separated by `;`: p,q or rel:lo,hi
    #[arg(long, value_delimiter = ';', default_value = "0,50;50,90;90,100;20,80;40,90;48,98;65,95")]
    pub classes: Vec<ClassSpec>,
    /// First and last year, as start,end (default: the panel's span)
    #[arg(long, value_parser = parse_pair::<i32>)]
    pub range: Option<(i32, i32)>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct YearMean {
    pub year: i32,
    pub mean_share: f64,
    pub countries: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassChange {
    pub compared: usize,
    pub decreasing: usize,
}

/// Cross-country mean share of `class` per year in `start..=end`.
pub fn class_series(panel: &Panel, class: ClassSpec, start: i32, end: i32) -> Vec<YearMean> {
    let mut by_year: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for (k, d) in panel.units() {
        if (start..=end).contains(&k.year) {
            if let Some(s) = class.share(d) {
                by_year.entry(k.year).or_default().push(s);
            }
        }
    }
    by_year
        .into_iter()
        .map(|(year, v)| YearMean {
            year,
            mean_share: v.iter().sum::<f64>() / v.len() as f64,
            countries: v.len(),
        })
        .collect()
}

/// Countries observed in both `start` and `end` whose class share fell.
pub fn class_change(panel: &Panel, class: ClassSpec, start: i32, end: i32) -> ClassChange {
    let mut change = ClassChange {
        compared: 0,
        decreasing: 0,
    };
    for country in panel.countries() {
        let at = |y| panel.get(&midclass_core::UnitKey::new(country, y)).and_then(|d| class.share(d));
        if let (Some(a), Some(b)) = (at(start), at(end)) {
            change.compared += 1;
            if b < a {
                change.decreasing += 1;
            }
        }
    }
    change
}

pub fn run(args: &TimeseriesArgs) -> Result<PathBuf> {
    let seed = args.simulate.then_some(args.seed);
    let mut out = OutputDir::create(&args.out, "timeseries", args, seed)?;
    let panel = if args.simulate {
        if args.panel.input.is_some() {
            bail!(midclass_core::Error::Config("--simulate and --input are exclusive".into()));
        }
        synthetic_panel(&SyntheticPanelConfig {
            seed: args.seed,
            ..SyntheticPanelConfig::default()
        })?
    } else {
        let loaded = load_panel(&args.panel)?;
        loaded.describe(&mut out);
        loaded.panel
    };
    let years = panel.years();
    let (Some(&first), Some(&last)) = (years.first(), years.last()) else {
        bail!(midclass_core::Error::Config("the panel is empty".into()));
    };
    let (start, end) = args.range.unwrap_or((first, last));
    if start > end {
        bail!(midclass_core::Error::Config(format!("empty year range {start},{end}")));
    }

    let mut series = Table::new("series", &["class", "year", "mean_share", "countries"]);
    let mut changes = Table::new(
        "change",
        &["class", "start_year", "end_year", "countries_compared", "countries_decreasing", "fraction_decreasing"],
    );
    let mut lines = Vec::new();
    for class in &args.classes {
        let name = class.to_string();
        let s = class_series(&panel, *class, start, end);
        for y in &s {
            series.push(row![name.as_str(), y.year, y.mean_share, y.countries]);
        }
        let c = class_change(&panel, *class, start, end);
        let fraction = (c.compared > 0).then(|| c.decreasing as f64 / c.compared as f64);
        changes.push(vec![
            Cell::from(name.as_str()),
            Cell::from(start),
            Cell::from(end),
            Cell::from(c.compared),
            Cell::from(c.decreasing),
            Cell::from(fraction),
        ]);
        lines.push(svg::Series {
            name,
            points: s.iter().map(|y| (y.year as f64, y.mean_share)).collect(),
        });
    }
    out.table(&series)?;
    out.table(&changes)?;
    out.svg("timeseries", &svg::lines("Average class income share", "year", "share", &lines))?;
    out.finish()
}

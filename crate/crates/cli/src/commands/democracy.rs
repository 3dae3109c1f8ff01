use std::path::PathBuf;

use anyhow::Result;
use clap::{ArgGroup, Args};
use midclass_core::panel_analysis::{
    build_five_year_panel, country_class_maps, endogenous_definitions, midclass_comparison, percentile_sweep,
    standard_definitions, ClassMaps, ComparisonEntry, MidclassDef, CONFIDENCE_LEVEL,
};
use midclass_core::{CovariateKey, Objective, PERCENTILES};
use serde::Serialize;

use super::parse_objective;
use crate::input::{load_panel, PanelArgs};
use crate::output::{Cell, OutputDir, Table};
use crate::{row, svg};

fn parse_key(s: &str) -> Result<CovariateKey, String> {
    let key: CovariateKey = s.parse().map_err(|e: midclass_core::Error| e.to_string())?;
    if !key.is_democracy() {
        return Err(format!("`{key}` is not a democracy measure"));
    }
    Ok(key)
}

#[derive(Args, Debug, Serialize)]
#[command(group(ArgGroup::new("mode").required(true).multiple(true).args(["sweep", "compare"])))]
pub struct DemocracyArgs {
    #[command(flatten)]
    pub panel: PanelArgs,
    /// vdem_polyarchy, vdem_liberal, polity or dd_binary
    #[arg(long, value_parser = parse_key)]
    pub democracy: CovariateKey,
    /// One regression per percentile share
    #[arg(long)]
    pub sweep: bool,
    /// One regression per middle-class definition
    #[arg(long)]
    pub compare: bool,
    #[arg(long, default_value_t = 1980)]
    pub start_year: i32,
    #[arg(long, default_value_t = 2020)]
    pub end_year: i32,
    /// Objective of the country-specific classes
    #[arg(long, default_value = "beta2", value_parser = parse_objective)]
    pub objective: Objective,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &DemocracyArgs) -> Result<PathBuf> {
    let mut out = OutputDir::create(&args.out, "democracy", args, None)?;
    let loaded = load_panel(&args.panel)?;
    loaded.describe(&mut out);
    let table = build_five_year_panel(&loaded.panel, args.start_year, args.end_year)?;
    out.note(format!(
        "{} five-year rows, {} dropped for missing lags or controls",
        table.rows.len(),
        table.dropped
    ));

    if args.sweep {
        let sweep = percentile_sweep(&table, args.democracy)?;
        let mut t = Table::new(
            "sweep",
            &["percentile", "status", "coefficient", "std_error", "ci_low", "ci_high", "significant", "note"],
        );
        for k in 1..=PERCENTILES as u32 {
            if let Some(p) = sweep.points.iter().find(|p| p.percentile == k) {
                t.push(row![k, "ok", p.coefficient, p.std_error, p.ci_low, p.ci_high, p.significant(), ""]);
            } else {
                let reason = sweep
                    .skipped
                    .iter()
                    .find(|(j, _)| *j == k)
                    .map_or("not estimated", |(_, r)| r.as_str());
                t.push(vec![
                    Cell::from(k),
                    Cell::from("skipped"),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::from(reason),
                ]);
            }
        }
        out.table(&t)?;
        let mut s = Table::new(
            "sweep_summary",
            &[
                "democracy",
                "level",
                "observations",
                "countries",
                "estimated",
                "significant",
                "mean_positive_percentile",
                "weighted_positive_percentile",
                "weights",
                "multiple_testing_correction",
            ],
        );
        s.push(vec![
            Cell::from(args.democracy.as_str()),
            Cell::from(sweep.level),
            Cell::from(sweep.n_obs),
            Cell::from(sweep.n_countries),
            Cell::from(sweep.points.len()),
            Cell::from(sweep.significant_count()),
            Cell::from(sweep.mean_positive_percentile()),
            Cell::from(sweep.weighted_positive_percentile()),
            Cell::from("coefficient magnitude"),
            Cell::from(sweep.multiple_testing_correction),
        ]);
        out.table(&s)?;
        let items: Vec<svg::Whisker> = sweep
            .points
            .iter()
            .map(|p| svg::Whisker {
                label: p.percentile.to_string(),
                estimate: p.coefficient,
                low: p.ci_low,
                high: p.ci_high,
            })
            .collect();
        let title = format!("{} on each lagged percentile share, {:.0}% CI", args.democracy, sweep.level * 100.0);
        out.svg("sweep", &svg::whiskers(&title, "coefficient", &items, None, 10))?;
    }

    if args.compare {
        let standard = standard_definitions();
        let endogenous = endogenous_definitions();
        let sizes: Vec<u32> = endogenous
            .iter()
            .filter_map(|d| match d {
                MidclassDef::CountrySpecific { size } => Some(*size),
                _ => None,
            })
            .collect();
        let maps: ClassMaps = country_class_maps(&loaded.panel, &sizes, args.objective)?;
        let defs: Vec<MidclassDef> = standard.iter().chain(&endogenous).copied().collect();
        let entries = midclass_comparison(&table, args.democracy, &defs, &maps)?;

        let mut t = Table::new(
            "compare",
            &[
                "order", "group", "definition", "status", "coefficient", "std_error", "ci_low", "ci_high",
                "observations", "countries", "note",
            ],
        );
        let mut items = Vec::new();
        for (i, entry) in entries.iter().enumerate() {
            if i == standard.len() {
                t.push(vec![
                    Cell::Empty,
                    Cell::from("separator"),
                    Cell::from("---"),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                ]);
            }
            let group = if i < standard.len() { "standard" } else { "endogenous" };
            match entry {
                ComparisonEntry::Run(run) => {
                    let eq = &run.equation;
                    let (lo, hi) = eq.conf_int(CONFIDENCE_LEVEL);
                    t.push(row![
                        i + 1,
                        group,
                        run.midclass_def.to_string(),
                        "ok",
                        eq.coefficient(),
                        eq.std_error(),
                        lo,
                        hi,
                        eq.fit.n_obs,
                        eq.n_countries,
                        ""
                    ]);
                    items.push(svg::Whisker {
                        label: run.midclass_def.to_string(),
                        estimate: eq.coefficient(),
                        low: lo,
                        high: hi,
                    });
                }
                ComparisonEntry::Skipped { midclass_def, reason } => {
                    t.push(vec![
                        Cell::from(i + 1),
                        Cell::from(group),
                        Cell::from(midclass_def.to_string()),
                        Cell::from("skipped"),
                        Cell::Empty,
                        Cell::Empty,
                        Cell::Empty,
                        Cell::Empty,
                        Cell::Empty,
                        Cell::Empty,
                        Cell::from(reason.as_str()),
                    ]);
                    items.push(svg::Whisker {
                        label: format!("{midclass_def} (skipped)"),
                        estimate: f64::NAN,
                        low: f64::NAN,
                        high: f64::NAN,
                    });
                }
            }
        }
        out.table(&t)?;
        let title = format!("{} on the lagged middle-class share, {:.0}% CI", args.democracy, CONFIDENCE_LEVEL * 100.0);
        let sep = standard.len().checked_sub(1);
        out.svg("compare", &svg::whiskers(&title, "coefficient", &items, sep, 1))?;
    }
    out.finish()
}

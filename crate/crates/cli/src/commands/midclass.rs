use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use midclass_core::frontier::{country_specific_classes, m_size_sweep, refine_continuous, solve_middle_class};
use midclass_core::Objective;
use serde::Serialize;

use super::{parse_objective, parse_pair};
use crate::input::{MeasureArgs, PanelArgs, SimArgs, Source};
use crate::output::{Cell, OutputDir, Table};
use crate::{row, svg};

#[derive(Args, Debug, Serialize)]
pub struct MidclassArgs {
    #[command(flatten)]
    pub panel: PanelArgs,
    /// Use simulated Pareto societies instead of --input
    #[arg(long)]
    pub simulate: bool,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub measure: MeasureArgs,
    /// Class size in percentiles
    #[arg(long = "m", visible_alias = "M", default_value_t = 50)]
    pub m: u32,
    /// beta2, or r2:<degree> for the R-squared of a polynomial fit
    #[arg(long, default_value = "beta2", value_parser = parse_objective)]
    pub objective: Objective,
    /// Solve each country's own time series
    #[arg(long)]
    pub per_country: bool,
    /// Restrict the panel to one year
    #[arg(long)]
    pub cross_section_year: Option<i32>,
    /// Admissible lower bounds as lo,hi (per-country default 1,49)
    #[arg(long, value_parser = parse_pair::<u32>)]
    pub p_bounds: Option<(u32, u32)>,
    /// Also locate the fractional lower bound
    #[arg(long)]
    pub refine: bool,
    /// Solve every size in lo,hi as well
    #[arg(long, value_parser = parse_pair::<u32>)]
    pub size_range: Option<(u32, u32)>,
    /// Country left out of the histogram (repeatable)
    #[arg(long)]
    pub exclude: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &MidclassArgs) -> Result<PathBuf> {
    let seed = args.simulate.then_some(args.sim.seed);
    let mut out = OutputDir::create(&args.out, "midclass", args, seed)?;
    let source = Source::open(&args.panel, args.simulate, &args.sim)?;
    source.describe(&mut out);
    let kind = args.measure.kind()?;
    let sample = source.cross_section(kind, args.cross_section_year)?;

    if args.per_country {
        let classes = country_specific_classes(&sample, args.m, args.objective, args.p_bounds)?;
        let mut t = Table::new("classes", &["country", "p", "q", "objective_value"]);
        for (c, s) in &classes.solutions {
            t.push(row![c.as_str(), s.interval.p(), s.interval.q(), s.objective_value]);
        }
        out.table(&t)?;
        let mut sk = Table::new("skipped", &["country", "reason"]);
        for s in &classes.skipped {
            sk.push(row![s.country.as_str(), s.reason.as_str()]);
        }
        out.table(&sk)?;

        let exclude: Vec<&str> = args.exclude.iter().map(String::as_str).collect();
        let hist = classes.histogram(&exclude);
        let mut h = Table::new("histogram", &["p", "countries"]);
        for (&p, &n) in &hist {
            h.push(row![p, n]);
        }
        out.table(&h)?;
        let mut s = Table::new(
            "summary",
            &["m", "objective", "p_lo", "p_hi", "countries", "skipped", "mean_initial_percentile", "share_at_49"],
        );
        s.push(vec![
            Cell::from(args.m),
            Cell::from(classes.objective.to_string()),
            Cell::from(classes.p_bounds.0),
            Cell::from(classes.p_bounds.1),
            Cell::from(classes.solutions.len()),
            Cell::from(classes.skipped.len()),
            Cell::from(classes.mean_initial_percentile()),
            Cell::from(classes.fraction_at(49)),
        ]);
        out.table(&s)?;
        let bars: Vec<(f64, f64)> = hist.iter().map(|(&p, &n)| (p as f64, n as f64)).collect();
        let title = format!("Initial percentile of country classes, M = {}", args.m);
        out.svg("histogram", &svg::bars(&title, "p", "countries", &bars, 0.8))?;
        return out.finish();
    }

    let sol = solve_middle_class(&sample, args.m, args.objective, args.p_bounds)?;
    let mut cols = vec!["measure", "objective", "m", "p", "q", "objective_value", "units"];
    let mut r = vec![
        Cell::from(kind.to_string()),
        Cell::from(args.objective.to_string()),
        Cell::from(args.m),
        Cell::from(sol.interval.p()),
        Cell::from(sol.interval.q()),
        Cell::from(sol.objective_value),
        Cell::from(sample.len()),
    ];
    if args.refine {
        let refined = refine_continuous(&sample, args.m, args.objective)?;
        cols.extend(["p_star", "refined_value"]);
        r.extend([Cell::from(refined.p_star), Cell::from(refined.objective_value)]);
    }
    let mut t = Table::new("solution", &cols);
    t.push(r);
    out.table(&t)?;

    if let Some((lo, hi)) = args.size_range {
        let sweep = m_size_sweep(&sample, lo, hi, args.objective)?;
        let mut st = Table::new("sizes", &["m", "p", "q", "objective_value"]);
        for s in &sweep.solutions {
            st.push(row![s.size_m, s.interval.p(), s.interval.q(), s.objective_value]);
        }
        out.table(&st)?;
        let mut ct = Table::new("common_percentiles", &["percentile"]);
        for &k in &sweep.common_percentiles {
            ct.push(row![k]);
        }
        out.table(&ct)?;
    }
    out.finish()
}

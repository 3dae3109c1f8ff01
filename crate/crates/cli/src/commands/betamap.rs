use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use midclass_core::frontier::{beta_map, zero_frontier};
use serde::Serialize;

use crate::input::{MeasureArgs, PanelArgs, SimArgs, Source};
use crate::output::{Cell, OutputDir, Table};
use crate::{row, svg};

#[derive(Args, Debug, Serialize)]
pub struct BetamapArgs {
    #[command(flatten)]
    pub panel: PanelArgs,
    /// Use simulated Pareto societies instead of --input
    #[arg(long)]
    pub simulate: bool,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub measure: MeasureArgs,
    /// Spacing of interval endpoints; must divide 100
    #[arg(long, default_value_t = 1)]
    pub grid_step: u32,
    /// Restrict the panel to one year
    #[arg(long)]
    pub cross_section_year: Option<i32>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &BetamapArgs) -> Result<PathBuf> {
    let seed = args.simulate.then_some(args.sim.seed);
    let mut out = OutputDir::create(&args.out, "betamap", args, seed)?;
    let source = Source::open(&args.panel, args.simulate, &args.sim)?;
    source.describe(&mut out);
    let sample = source.cross_section(args.measure.kind()?, args.cross_section_year)?;
    let surface = beta_map(&sample, args.grid_step)?;

    let mut table = Table::new("surface", &["p", "q", "alpha", "beta", "beta_se", "r_squared"]);
    for s in &surface.grid {
        table.push(row![s.interval.p(), s.interval.q(), s.alpha, s.beta, s.beta_se, s.r_squared]);
    }
    out.table(&table)?;

    let frontier = zero_frontier(&surface);
    let mut ft = Table::new("frontier", &["p", "q_star"]);
    for f in &frontier {
        ft.push(vec![Cell::from(f.p), Cell::from(f.q_star)]);
    }
    out.table(&ft)?;

    let points: Vec<(u32, u32, f64)> = surface
        .grid
        .iter()
        .map(|s| (s.interval.p(), s.interval.q(), s.beta))
        .collect();
    let line: Vec<(f64, f64)> = frontier
        .iter()
        .filter_map(|f| f.q_star.map(|q| (f.p as f64, q)))
        .collect();
    let title = format!("Sign of the {} slope, n = {}", surface.inequality_kind, sample.len());
    out.svg("betamap", &svg::sign_map(&title, &points, &line))?;
    out.finish()
}

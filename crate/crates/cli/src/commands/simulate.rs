use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use midclass_core::pareto::sample_societies;
use midclass_core::regression::{correlation, fit_line};
use midclass_core::{CrossSection, QuantileInterval, PERCENTILES};
use serde::Serialize;

use super::{coefficient_of_variation, parse_interval};
use crate::input::SimArgs;
use crate::output::{OutputDir, Table};
use crate::{row, svg};

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Interval to summarize and plot against the Gini, as p,q (repeatable)
    #[arg(long = "interval", value_parser = parse_interval, default_values = ["20,21", "99,100", "20,80", "40,90", "49,99"])]
    pub intervals: Vec<QuantileInterval>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &SimulateArgs) -> Result<PathBuf> {
    let mut out = OutputDir::create(&args.out, "simulate", args, Some(args.sim.seed))?;
    let societies = sample_societies(&args.sim.config())?;

    let mut table = Table::new("societies", &["society", "gini", "nu", "alpha", "y_m", "mean_income"]);
    let mut shares = Table::new("shares", &["society", "percentile", "share"]);
    for (i, s) in societies.iter().enumerate() {
        let id = format!("society-{:04}", i + 1);
        table.push(row![id.as_str(), s.gini_closed_form(), s.nu(), s.alpha(), s.y_m(), s.mean_income()]);
        let d = s.discretize(id.as_str(), 0)?;
        for k in 0..PERCENTILES {
            shares.push(row![id.as_str(), k + 1, d.shares()[k]]);
        }
    }
    out.table(&table)?;
    out.table(&shares)?;

    let sample = CrossSection::from_societies("pareto", &societies)?;
    let gini = sample.inequality();
    let mut summary = Table::new(
        "intervals",
        &["p", "q", "alpha", "beta", "beta_se", "r_squared", "correlation", "mean_share", "cv"],
    );
    for &iv in &args.intervals {
        let s = sample.shares(iv);
        let fit = fit_line(&s, gini)?;
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        summary.push(row![
            iv.p(),
            iv.q(),
            fit.alpha,
            fit.beta,
            fit.beta_se,
            fit.r_squared,
            correlation(&s, gini),
            mean,
            coefficient_of_variation(&s)
        ]);
        let points: Vec<(f64, f64)> = gini.iter().copied().zip(s.iter().copied()).collect();
        let plot = svg::scatter(
            &format!("Share of {iv} against the Gini"),
            "Gini",
            &format!("share {iv}"),
            &points,
            Some((fit.alpha, fit.beta)),
            &format!("slope {:.4}, R2 {:.3}", fit.beta, fit.r_squared),
        );
        out.svg(&format!("scatter_{}_{}", iv.p(), iv.q()), &plot)?;
    }
    out.table(&summary)?;
    out.finish()
}

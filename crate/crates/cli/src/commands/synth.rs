use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use midclass_core::data_io::{save_covariates, save_shares};
use midclass_core::synthetic::{attach_democracy, synthetic_panel, DemocracyDgp, SyntheticPanelConfig};
use midclass_core::{CovariateKey, QuantileInterval};
use serde::Serialize;

use super::parse_interval;
use crate::output::OutputDir;

#[derive(Args, Debug, Serialize)]
pub struct SynthPanelArgs {
    #[arg(long, default_value_t = 80)]
    pub countries: usize,
    #[arg(long, default_value_t = 1980)]
    pub start_year: i32,
    #[arg(long, default_value_t = 2020)]
    pub end_year: i32,
    #[arg(long, default_value_t = 1)]
    pub year_step: i32,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Omit the avg_income column
    #[arg(long)]
    pub no_incomes: bool,
    /// Also generate this democracy measure on the five-year grid
    #[arg(long)]
    pub democracy: Option<CovariateKey>,
    /// Interval whose lagged share drives democracy, as p,q
    #[arg(long, value_parser = parse_interval, default_value = "48,98")]
    pub plant: QuantileInterval,
    #[arg(long, default_value_t = 2.0)]
    pub effect: f64,
    /// Make democracy pure noise
    #[arg(long)]
    pub placebo: bool,
    /// Writes shares.csv and covariates.csv here
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &SynthPanelArgs) -> Result<PathBuf> {
    let mut out = OutputDir::create(&args.out, "synth-panel", args, Some(args.seed))?;
    let cfg = SyntheticPanelConfig {
        n_countries: args.countries,
        start_year: args.start_year,
        end_year: args.end_year,
        year_step: args.year_step,
        with_mean_incomes: !args.no_incomes,
        seed: args.seed,
        ..SyntheticPanelConfig::default()
    };
    let mut panel = synthetic_panel(&cfg)?;
    if let Some(key) = args.democracy {
        if !key.is_democracy() {
            bail!(midclass_core::Error::Config(format!("`{key}` is not a democracy measure")));
        }
        let dgp = if args.placebo {
            DemocracyDgp::placebo(key, args.start_year)
        } else {
            DemocracyDgp::planted(key, args.start_year, args.plant, args.effect)
        };
        panel = attach_democracy(&panel, &dgp, args.seed.wrapping_add(1))?;
    } else if args.placebo {
        bail!(midclass_core::Error::Config("--placebo needs --democracy".into()));
    }
    save_shares(&panel, args.out.join("shares.csv"))?;
    save_covariates(&panel, args.out.join("covariates.csv"))?;
    out.note(format!("{} country-years", panel.len()));
    out.finish()
}

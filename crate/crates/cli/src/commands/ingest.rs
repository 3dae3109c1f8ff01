use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use midclass_core::data_io::cache_store;
use midclass_core::inequality::gini_from_shares;
use serde::Serialize;

use crate::input::{load_panel, PanelArgs};
use crate::output::{OutputDir, Table};
use crate::row;

#[derive(Args, Debug, Serialize)]
pub struct IngestArgs {
    #[command(flatten)]
    pub panel: PanelArgs,
    /// Writes panel.mcp plus unit and outlier tables here
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &IngestArgs) -> Result<PathBuf> {
    let mut out = OutputDir::create(&args.out, "ingest", args, None)?;
    let loaded = load_panel(&args.panel)?;
    loaded.describe(&mut out);
    let panel = &loaded.panel;

    let mut units = Table::new("units", &["country", "year", "gini", "clamped", "avg_income", "covariates"]);
    for (k, d) in panel.units() {
        let covs: Vec<&str> = panel
            .covariates_of(k)
            .map(|m| m.keys().map(|c| c.as_str()).collect())
            .unwrap_or_default();
        units.push(row![
            k.country.as_str(),
            k.year,
            gini_from_shares(d),
            d.was_clamped(),
            d.mean_incomes().is_some(),
            covs.join(" ")
        ]);
    }
    out.table(&units)?;
    if let Some(report) = &loaded.outliers {
        let mut t = Table::new("outliers", &["country", "year", "reason"]);
        for u in &report.excluded_units {
            t.push(row![u.country.as_str(), u.year, u.reason.as_str()]);
        }
        out.table(&t)?;
    }
    let cache = args.out.join("panel.mcp");
    cache_store(panel, &cache)?;
    out.note(format!("cache written to {}", cache.display()));
    out.finish()
}

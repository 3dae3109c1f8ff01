//! Input flags shared by the subcommands, and panel loading through the
//! cache directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use midclass_core::data_io::{
    cache_load, cache_store, filter_outliers, load_covariates, load_shares, CovariateSchema, FormatSpec,
    OutlierReport, ShareScale, CACHE_MAGIC,
};
use midclass_core::inequality::DEFAULT_ATKINSON_EPSILON;
use midclass_core::pareto::{sample_societies, DEFAULT_SEED};
use midclass_core::{CrossSection, InequalityKind, MonteCarloConfig, Panel, ParetoSociety};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::output::OutputDir;

pub const CACHE_DIR_ENV: &str = "MIDCLASS_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Auto,
    Fraction,
    Percent,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PanelArgs {
    /// Long share file (country,year,percentile,share[,avg_income]) or a panel cache
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Long covariate file (country,year,variable,value)
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    /// Drop countries with a share this many SDs from the country mean
    #[arg(long)]
    pub outlier_sd: Option<f64>,
    #[arg(long, value_enum, default_value_t = Scale::Auto)]
    pub scale: Scale,
    /// Neither read nor write the panel cache
    #[arg(long)]
    pub no_cache: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SimArgs {
    /// Number of simulated societies
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0.4)]
    pub gini_mean: f64,
    #[arg(long, default_value_t = 0.05)]
    pub gini_sd: f64,
    #[arg(long, default_value_t = 0.1)]
    pub nu_lo: f64,
    #[arg(long, default_value_t = 0.2)]
    pub nu_hi: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

impl SimArgs {
    pub fn config(&self) -> MonteCarloConfig {
        MonteCarloConfig {
            n_societies: self.n,
            gini_mean: self.gini_mean,
            gini_sd: self.gini_sd,
            nu_lo: self.nu_lo,
            nu_hi: self.nu_hi,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Gini,
    Atkinson,
    Theil,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MeasureArgs {
    #[arg(long, value_enum, default_value_t = Measure::Gini)]
    pub measure: Measure,
    /// Inequality aversion of the Atkinson index
    #[arg(long, default_value_t = DEFAULT_ATKINSON_EPSILON)]
    pub epsilon: f64,
}

impl MeasureArgs {
    pub fn kind(&self) -> Result<InequalityKind> {
        Ok(match self.measure {
            Measure::Gini => InequalityKind::Gini,
            Measure::Atkinson => InequalityKind::atkinson(self.epsilon)?,
            Measure::Theil => InequalityKind::Theil,
        })
    }
}

pub struct LoadedPanel {
    pub panel: Panel,
    pub outliers: Option<OutlierReport>,
}

impl LoadedPanel {
    /// Records input digests and outlier exclusions in the manifest.
    pub fn describe(&self, out: &mut OutputDir) {
        for rec in self.panel.provenance() {
            if !rec.sha256.is_empty() {
                out.input_digest(&format!("{}:{}", rec.role, rec.path), &rec.sha256);
            }
            for note in &rec.notes {
                out.note(format!("{}: {note}", rec.role));
            }
        }
        if let Some(r) = &self.outliers {
            out.note(format!("outlier filter at {} SD excluded {:?}", r.threshold_sd, r.excluded_countries));
        }
    }
}

fn cache_dir() -> Option<PathBuf> {
    if let Some(dir) = std::env::var_os(CACHE_DIR_ENV) {
        return Some(PathBuf::from(dir));
    }
    std::env::var_os("HOME").map(|h| Path::new(&h).join(".cache").join("midclass"))
}

fn is_cache_file(path: &Path) -> Result<bool> {
    use std::io::Read;
    let mut head = [0u8; 8];
    let mut f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(f.read(&mut head)? == head.len() && &head == CACHE_MAGIC)
}

fn format_spec(scale: Scale) -> FormatSpec {
    FormatSpec {
        scale: match scale {
            Scale::Auto => ShareScale::Auto,
            Scale::Fraction => ShareScale::Fraction,
            Scale::Percent => ShareScale::Percent,
        },
        ..FormatSpec::default()
    }
}

fn load_uncached(input: &Path, args: &PanelArgs) -> Result<Panel> {
    let panel = load_shares(input, &format_spec(args.scale))?;
    Ok(match &args.covariates {
        Some(c) => load_covariates(&panel, c, &CovariateSchema::default())?,
        None => panel,
    })
}

/// Loads `--input`, merging `--covariates`, through the content-addressed
/// cache, then applies the outlier filter.
pub fn load_panel(args: &PanelArgs) -> Result<LoadedPanel> {
    let Some(input) = &args.input else {
        bail!(midclass_core::Error::Config("an --input panel is required".into()));
    };
    let panel = if is_cache_file(input)? {
        let p = cache_load(input)?;
        match &args.covariates {
            Some(c) => load_covariates(&p, c, &CovariateSchema::default())?,
            None => p,
        }
    } else if let Some(dir) = cache_dir().filter(|_| !args.no_cache) {
        let mut h = Sha256::new();
        h.update(std::fs::read(input).with_context(|| format!("reading {}", input.display()))?);
        if let Some(c) = &args.covariates {
            h.update(b"\0covariates\0");
            h.update(std::fs::read(c).with_context(|| format!("reading {}", c.display()))?);
        }
        h.update(serde_json::to_vec(&format_spec(args.scale))?);
        let path = dir.join(format!("{}.mcp", hex::encode(h.finalize())));
        match cache_load(&path) {
            Ok(p) => {
                log::info!("loaded cached panel {}", path.display());
                p
            }
            Err(e) => {
                if path.exists() {
                    log::warn!("ignoring unusable cache {}: {e}", path.display());
                }
                let p = load_uncached(input, args)?;
                let stored = std::fs::create_dir_all(&dir)
                    .map_err(midclass_core::Error::from)
                    .and_then(|_| cache_store(&p, &path));
                if let Err(e) = stored {
                    log::warn!("could not write cache {}: {e}", path.display());
                }
                p
            }
        }
    } else {
        load_uncached(input, args)?
    };
    match args.outlier_sd {
        Some(sd) => {
            let (kept, report) = filter_outliers(&panel, sd)?;
            Ok(LoadedPanel {
                panel: kept,
                outliers: Some(report),
            })
        }
        None => Ok(LoadedPanel { panel, outliers: None }),
    }
}

/// Monte Carlo societies as a regression sample. The Gini sample uses the
/// closed-form index; other measures are evaluated on the discretized shares.
pub fn society_sample(societies: &[ParetoSociety], kind: InequalityKind) -> Result<CrossSection> {
    if kind == InequalityKind::Gini {
        return Ok(CrossSection::from_societies("pareto", societies)?);
    }
    let dists = societies
        .iter()
        .enumerate()
        .map(|(i, s)| s.discretize(format!("society-{:04}", i + 1), 0))
        .collect::<midclass_core::Result<Vec<_>>>()?;
    Ok(CrossSection::from_distributions("pareto", kind, &dists)?)
}

/// Panel or simulated societies, whichever the flags select.
pub enum Source {
    Panel(LoadedPanel),
    Societies(Vec<ParetoSociety>),
}

impl Source {
    pub fn open(panel: &PanelArgs, simulate: bool, sim: &SimArgs) -> Result<Self> {
        if simulate {
            if panel.input.is_some() {
                bail!(midclass_core::Error::Config("--simulate and --input are exclusive".into()));
            }
            return Ok(Source::Societies(sample_societies(&sim.config())?));
        }
        Ok(Source::Panel(load_panel(panel)?))
    }

    pub fn describe(&self, out: &mut OutputDir) {
        match self {
            Source::Panel(p) => p.describe(out),
            Source::Societies(s) => out.note(format!("{} simulated societies", s.len())),
        }
    }

    /// Every unit, optionally restricted to one year.
    pub fn cross_section(&self, kind: InequalityKind, year: Option<i32>) -> Result<CrossSection> {
        match self {
            Source::Societies(s) => {
                if year.is_some() {
                    bail!(midclass_core::Error::Config("--cross-section-year needs an --input panel".into()));
                }
                society_sample(s, kind)
            }
            Source::Panel(p) => {
                let panel = match year {
                    Some(y) => p.panel.filter(|k| k.year == y),
                    None => p.panel.clone(),
                };
                if panel.is_empty() {
                    bail!(midclass_core::Error::Config(match year {
                        Some(y) => format!("the panel has no units in {y}"),
                        None => "the panel is empty".into(),
                    }));
                }
                let id = year.map_or_else(|| "panel".to_string(), |y| format!("panel-{y}"));
                Ok(panel.cross_section(id, kind)?)
            }
        }
    }
}

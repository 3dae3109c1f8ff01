//! Seeded synthetic panels for tests, benchmarks and offline demos.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data_io::{CovariateKey, Panel, SourceRecord};
use crate::distribution::{PercentileDistribution, QuantileInterval};
use crate::error::{Error, Result};
use crate::inequality::gini_from_shares;
use crate::pareto::ParetoSociety;
use crate::sample::UnitKey;

const GINI_RANGE: (f64, f64) = (0.25, 0.70);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPanelConfig {
    pub n_countries: usize,
    pub start_year: i32,
    pub end_year: i32,
    pub year_step: i32,
    pub gini_mean: f64,
    /// Spread of country Gini levels.
    pub gini_between_sd: f64,
    /// Random-walk step of each country's Gini per observed year.
    pub gini_drift_sd: f64,
    pub nu_lo: f64,
    pub nu_hi: f64,
    /// Multiplicative log-normal noise applied to each percentile share.
    pub share_noise_sd: f64,
    pub with_mean_incomes: bool,
    pub seed: u64,
}

impl Default for SyntheticPanelConfig {
    fn default() -> Self {
        SyntheticPanelConfig {
            n_countries: 80,
            start_year: 1980,
            end_year: 2020,
            year_step: 1,
            gini_mean: 0.40,
            gini_between_sd: 0.06,
            gini_drift_sd: 0.01,
            nu_lo: 0.10,
            nu_hi: 0.20,
            share_noise_sd: 0.03,
            with_mean_incomes: true,
            seed: 42,
        }
    }
}

impl SyntheticPanelConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_countries == 0 {
            return bad("need at least one country");
        }
        if self.year_step < 1 || self.end_year < self.start_year {
            return bad("year range must be non-empty with a positive step");
        }
        if !(0.0 < self.nu_lo && self.nu_lo <= self.nu_hi && self.nu_hi < GINI_RANGE.0) {
            return bad("need 0 < nu_lo <= nu_hi < 0.25");
        }
        for v in [self.gini_between_sd, self.gini_drift_sd, self.share_noise_sd] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad("dispersion parameters must be non-negative");
            }
        }
        Ok(())
    }
}

fn normal(rng: &mut ChaCha20Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Keeps `g` inside `[lo, hi]` by reflection.
fn reflect(mut g: f64, lo: f64, hi: f64) -> f64 {
    for _ in 0..8 {
        if g < lo {
            g = 2.0 * lo - g;
        } else if g > hi {
            g = 2.0 * hi - g;
        } else {
            return g;
        }
    }
    g.clamp(lo, hi)
}

/// Country-year panel of noisy zero-inflated Pareto distributions with
/// `gdp_pc`, `schooling` and `gini_ext` covariates.
pub fn synthetic_panel(cfg: &SyntheticPanelConfig) -> Result<Panel> {
    cfg.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut dists = Vec::new();
    let mut covs = Vec::new();
    for c in 0..cfg.n_countries {
        let country = format!("S{:03}", c + 1);
        let mut g = reflect(
            cfg.gini_mean + cfg.gini_between_sd * normal(&mut rng),
            GINI_RANGE.0,
            GINI_RANGE.1,
        );
        let nu = rng.random_range(cfg.nu_lo..=cfg.nu_hi);
        let mut ln_gdp = 9.0 + normal(&mut rng);
        let growth = 0.02 + 0.01 * normal(&mut rng);
        let school0 = (7.0 + 2.0 * normal(&mut rng)).max(0.5);
        for year in (cfg.start_year..=cfg.end_year).step_by(cfg.year_step as usize) {
            g = reflect(g + cfg.gini_drift_sd * normal(&mut rng), GINI_RANGE.0, GINI_RANGE.1);
            ln_gdp += growth * cfg.year_step as f64 + 0.02 * normal(&mut rng);
            let society = ParetoSociety::from_gini(g, nu)?;
            let base = society.discretize(country.clone(), year)?;
            let mut w: Vec<f64> = base
                .shares()
                .iter()
                .map(|s| s * (cfg.share_noise_sd * normal(&mut rng)).exp())
                .collect();
            w.sort_by(f64::total_cmp);
            let mut d = PercentileDistribution::from_weights(country.clone(), year, &w)?;
            let gdp = ln_gdp.exp();
            if cfg.with_mean_incomes {
                let inc: Vec<f64> = d.shares().iter().map(|s| s * 100.0 * gdp).collect();
                d = d.with_mean_incomes(inc)?;
            }
            let school = school0 + 0.08 * (year - cfg.start_year) as f64 + 0.2 * normal(&mut rng);
            let key = UnitKey::new(country.clone(), year);
            covs.push((key.clone(), CovariateKey::GdpPc, gdp));
            covs.push((key.clone(), CovariateKey::Schooling, school.max(0.0)));
            covs.push((key, CovariateKey::GiniExt, gini_from_shares(&d)));
            dists.push(d);
        }
    }
    let mut panel = Panel::from_distributions(dists)?;
    for (key, var, v) in covs {
        panel = panel.with_covariate(&key, var, v)?;
    }
    let rows = panel.len() as u64;
    Ok(panel.with_provenance(SourceRecord {
        role: "synthetic".into(),
        path: String::new(),
        sha256: String::new(),
        rows,
        notes: vec![serde_json::to_string(cfg).expect("config serializes")],
    }))
}

/// Five-year democracy process layered on a panel.
///
/// `DEM_t = rho DEM_{t-5} + b S_{t-5} + g ln gdp_{t-5} + a_i + d_t + e`,
/// where `S` is the share of the planted interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemocracyDgp {
    pub key: CovariateKey,
    pub start_year: i32,
    pub rho: f64,
    pub planted: Option<(QuantileInterval, f64)>,
    pub gdp_effect: f64,
    pub country_sd: f64,
    pub period_trend: f64,
    pub noise_sd: f64,
    /// Pure noise, ignoring every other parameter.
    pub placebo: bool,
}

impl DemocracyDgp {
    pub fn planted(key: CovariateKey, start_year: i32, interval: QuantileInterval, effect: f64) -> Self {
        DemocracyDgp {
            key,
            start_year,
            rho: 0.5,
            planted: Some((interval, effect)),
            gdp_effect: 0.05,
            country_sd: 0.1,
            period_trend: 0.01,
            noise_sd: 0.05,
            placebo: false,
        }
    }

    pub fn placebo(key: CovariateKey, start_year: i32) -> Self {
        DemocracyDgp {
            key,
            start_year,
            rho: 0.0,
            planted: None,
            gdp_effect: 0.0,
            country_sd: 0.0,
            period_trend: 0.0,
            noise_sd: 1.0,
            placebo: true,
        }
    }
}

/// Adds `dgp.key` at the five-year grid years of every country.
pub fn attach_democracy(panel: &Panel, dgp: &DemocracyDgp, seed: u64) -> Result<Panel> {
    if !dgp.key.is_democracy() || dgp.key == CovariateKey::DdBinary {
        return Err(Error::Config(format!(
            "the democracy process generates continuous values; `{}` is not a continuous democracy key",
            dgp.key
        )));
    }
    if !(dgp.rho.abs() < 1.0) {
        return Err(Error::Config(format!("rho must lie in (-1, 1), got {}", dgp.rho)));
    }
    let noise = Normal::new(0.0, dgp.noise_sd).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let last = panel.years().last().copied().unwrap_or(dgp.start_year);
    let countries: BTreeSet<String> = panel.countries().into_iter().map(str::to_string).collect();

    let drive = |key: &UnitKey| -> Result<f64> {
        let mut v = 0.0;
        if let Some((iv, b)) = dgp.planted {
            v += b * panel.get(key).expect("caller checked").interval_share(iv);
        }
        if dgp.gdp_effect != 0.0 {
            let gdp = panel
                .covariate(key, CovariateKey::GdpPc)
                .ok_or_else(|| Error::domain(format!("{key} lacks gdp_pc")))?;
            v += dgp.gdp_effect * gdp.ln();
        }
        Ok(v)
    };

    let mut out = panel.clone();
    for country in &countries {
        let alpha = dgp.country_sd * normal(&mut rng);
        let mut prev: Option<f64> = None;
        for (period, t) in (dgp.start_year..=last).step_by(5).enumerate() {
            let key = UnitKey::new(country.clone(), t);
            if panel.get(&key).is_none() {
                prev = None;
                continue;
            }
            let e = noise.sample(&mut rng);
            let dem = if dgp.placebo {
                e
            } else {
                let lag_key = UnitKey::new(country.clone(), t - 5);
                match prev {
                    Some(p) if panel.get(&lag_key).is_some() => {
                        dgp.rho * p + drive(&lag_key)? + alpha + dgp.period_trend * period as f64 + e
                    }
                    _ => (alpha + drive(&key)?) / (1.0 - dgp.rho) + e,
                }
            };
            out = out.with_covariate(&key, dgp.key, dem)?;
            prev = Some(dem);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticPanelConfig {
        SyntheticPanelConfig {
            n_countries: 6,
            start_year: 2000,
            end_year: 2010,
            ..SyntheticPanelConfig::default()
        }
    }

    #[test]
    fn deterministic_and_complete() {
        let a = synthetic_panel(&small()).unwrap();
        let b = synthetic_panel(&small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 66);
        for (k, d) in a.units() {
            assert!(d.mean_incomes().is_some());
            assert!(a.covariate(k, CovariateKey::GdpPc).unwrap() > 0.0);
            let g = a.covariate(k, CovariateKey::GiniExt).unwrap();
            assert!((0.2..0.8).contains(&g), "{g}");
        }
        let other = synthetic_panel(&SyntheticPanelConfig { seed: 7, ..small() }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn democracy_on_five_year_grid_only() {
        let p = synthetic_panel(&small()).unwrap();
        let iv = QuantileInterval::new(48, 98).unwrap();
        let dgp = DemocracyDgp::planted(CovariateKey::Polity, 2000, iv, 1.0);
        let q = attach_democracy(&p, &dgp, 3).unwrap();
        let with: BTreeSet<i32> = q
            .units()
            .filter(|(k, _)| q.covariate(k, CovariateKey::Polity).is_some())
            .map(|(k, _)| k.year)
            .collect();
        assert_eq!(with.into_iter().collect::<Vec<_>>(), [2000, 2005, 2010]);
        assert!(attach_democracy(&p, &DemocracyDgp { key: CovariateKey::DdBinary, ..dgp.clone() }, 3).is_err());
        assert!(attach_democracy(&p, &DemocracyDgp { key: CovariateKey::GdpPc, ..dgp }, 3).is_err());
    }

    #[test]
    fn reflection_stays_in_range() {
        assert!((reflect(0.2, 0.25, 0.7) - 0.3).abs() < 1e-15);
        assert!((reflect(0.75, 0.25, 0.7) - 0.65).abs() < 1e-15);
        assert_eq!(reflect(0.5, 0.25, 0.7), 0.5);
    }
}

//! Percentile-share panels: ingestion, covariates, outlier screening and a
//! binary cache.

mod cache;
mod covariates;
mod outliers;
mod shares;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distribution::PercentileDistribution;
use crate::error::{Error, Result};
use crate::inequality::InequalityKind;
use crate::sample::{CrossSection, UnitKey};

pub use cache::{cache_load, cache_store, CACHE_MAGIC, CACHE_VERSION};
pub use covariates::{load_covariates, save_covariates, CovariateSchema};
pub use outliers::{filter_outliers, ExcludedUnit, OutlierReport};
pub use shares::{load_shares, save_shares, FormatSpec, ShareScale};

/// Country-year covariates understood by the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateKey {
    GdpPc,
    Schooling,
    GiniExt,
    VdemPolyarchy,
    VdemLiberal,
    Polity,
    DdBinary,
}

impl CovariateKey {
    pub const ALL: [CovariateKey; 7] = [
        CovariateKey::GdpPc,
        CovariateKey::Schooling,
        CovariateKey::GiniExt,
        CovariateKey::VdemPolyarchy,
        CovariateKey::VdemLiberal,
        CovariateKey::Polity,
        CovariateKey::DdBinary,
    ];

    pub const DEMOCRACY: [CovariateKey; 4] = [
        CovariateKey::VdemPolyarchy,
        CovariateKey::VdemLiberal,
        CovariateKey::Polity,
        CovariateKey::DdBinary,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CovariateKey::GdpPc => "gdp_pc",
            CovariateKey::Schooling => "schooling",
            CovariateKey::GiniExt => "gini_ext",
            CovariateKey::VdemPolyarchy => "vdem_polyarchy",
            CovariateKey::VdemLiberal => "vdem_liberal",
            CovariateKey::Polity => "polity",
            CovariateKey::DdBinary => "dd_binary",
        }
    }

    pub fn is_democracy(&self) -> bool {
        Self::DEMOCRACY.contains(self)
    }

    /// Stable one-byte tag used by the cache.
    pub(crate) fn code(&self) -> u8 {
        Self::ALL.iter().position(|k| k == self).expect("listed") as u8 + 1
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get((code as usize).checked_sub(1)?).copied()
    }
}

impl fmt::Display for CovariateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CovariateKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Self::ALL
            .iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .copied()
            .ok_or_else(|| Error::UnknownKey(s.to_string()))
    }
}

/// Where part of a panel came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRecord {
    /// `shares`, `covariates`, `synthetic` or `filter`.
    pub role: String,
    pub path: String,
    pub sha256: String,
    pub rows: u64,
    pub notes: Vec<String>,
}

impl SourceRecord {
    pub(crate) fn for_bytes(role: &str, path: &Path, bytes: &[u8], rows: u64) -> Self {
        SourceRecord {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            rows,
            notes: Vec::new(),
        }
    }
}

/// Country-year distributions plus merged covariates.
///
/// Filters and merges return new panels; a panel is never changed in place
/// once built.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Panel {
    units: BTreeMap<UnitKey, PercentileDistribution>,
    covariates: BTreeMap<UnitKey, BTreeMap<CovariateKey, f64>>,
    provenance: Vec<SourceRecord>,
}

impl Panel {
    /// Panel over `dists`; two distributions for one country-year are rejected.
    pub fn from_distributions(dists: impl IntoIterator<Item = PercentileDistribution>) -> Result<Self> {
        let mut units = BTreeMap::new();
        for d in dists {
            let key = UnitKey::new(d.country(), d.year());
            if units.contains_key(&key) {
                return Err(Error::Duplicate {
                    path: "<memory>".into(),
                    key: key.to_string(),
                });
            }
            units.insert(key, d);
        }
        Ok(Panel {
            units,
            ..Panel::default()
        })
    }

    /// Adds a covariate value for an existing unit.
    pub fn with_covariate(mut self, key: &UnitKey, var: CovariateKey, value: f64) -> Result<Self> {
        if !self.units.contains_key(key) {
            return Err(Error::domain(format!("no unit {key} in panel")));
        }
        if !value.is_finite() {
            return Err(Error::domain(format!("{var} for {key} is not finite")));
        }
        self.covariates.entry(key.clone()).or_default().insert(var, value);
        Ok(self)
    }

    pub fn with_provenance(mut self, record: SourceRecord) -> Self {
        self.provenance.push(record);
        self
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn get(&self, key: &UnitKey) -> Option<&PercentileDistribution> {
        self.units.get(key)
    }

    pub fn units(&self) -> impl Iterator<Item = (&UnitKey, &PercentileDistribution)> {
        self.units.iter()
    }

    pub fn distributions(&self) -> impl Iterator<Item = &PercentileDistribution> {
        self.units.values()
    }

    pub fn countries(&self) -> BTreeSet<&str> {
        self.units.keys().map(|k| k.country.as_str()).collect()
    }

    pub fn years(&self) -> BTreeSet<i32> {
        self.units.keys().map(|k| k.year).collect()
    }

    pub fn covariate(&self, key: &UnitKey, var: CovariateKey) -> Option<f64> {
        self.covariates.get(key)?.get(&var).copied()
    }

    pub fn covariates_of(&self, key: &UnitKey) -> Option<&BTreeMap<CovariateKey, f64>> {
        self.covariates.get(key)
    }

    /// Covariate keys present for at least one unit.
    pub fn covariate_keys(&self) -> BTreeSet<CovariateKey> {
        self.covariates.values().flat_map(|m| m.keys().copied()).collect()
    }

    pub fn provenance(&self) -> &[SourceRecord] {
        &self.provenance
    }

    /// Units (and their covariates) for which `keep` holds.
    pub fn filter(&self, keep: impl Fn(&UnitKey) -> bool) -> Panel {
        Panel {
            units: self
                .units
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            covariates: self
                .covariates
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Every unit as one regression sample.
    pub fn cross_section(&self, id: impl Into<String>, kind: InequalityKind) -> Result<CrossSection> {
        CrossSection::from_distributions(id, kind, self.units.values())
    }

    pub(crate) fn from_parts(
        units: BTreeMap<UnitKey, PercentileDistribution>,
        covariates: BTreeMap<UnitKey, BTreeMap<CovariateKey, f64>>,
        provenance: Vec<SourceRecord>,
    ) -> Self {
        Panel {
            units,
            covariates,
            provenance,
        }
    }
}

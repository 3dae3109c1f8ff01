//! A cross-section of distributions paired with an inequality regressor.

use serde::{Deserialize, Serialize};

use crate::distribution::{lorenz_at, PercentileDistribution, QuantileInterval, PERCENTILES};
use crate::error::{Error, Result};
use crate::inequality::InequalityKind;
use crate::pareto::ParetoSociety;

/// Identifies one observation of a sample.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UnitKey {
    pub country: String,
    pub year: i32,
}

impl UnitKey {
    pub fn new(country: impl Into<String>, year: i32) -> Self {
        UnitKey {
            country: country.into(),
            year,
        }
    }
}

impl std::fmt::Display for UnitKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}", self.country, self.year)
    }
}

/// The observations over which `S(p,q)` is regressed on inequality.
///
/// Integer-percentile shares come from each unit's Lorenz curve. Fractional
/// bounds use the closed form when the sample was drawn from Pareto
/// societies, and linear interpolation of the Lorenz curve otherwise.
#[derive(Debug, Clone)]
pub struct CrossSection {
    id: String,
    kind: InequalityKind,
    keys: Vec<UnitKey>,
    inequality: Vec<f64>,
    lorenz: Vec<[f64; PERCENTILES + 1]>,
    societies: Option<Vec<ParetoSociety>>,
}

impl CrossSection {
    /// Regressor computed from the shares with the given index.
    pub fn from_distributions<'a>(
        id: impl Into<String>,
        kind: InequalityKind,
        dists: impl IntoIterator<Item = &'a PercentileDistribution>,
    ) -> Result<Self> {
        let mut keys = Vec::new();
        let mut inequality = Vec::new();
        let mut lorenz = Vec::new();
        for d in dists {
            keys.push(UnitKey::new(d.country(), d.year()));
            inequality.push(kind.evaluate(d)?);
            lorenz.push(d.lorenz_curve());
        }
        Ok(CrossSection {
            id: id.into(),
            kind,
            keys,
            inequality,
            lorenz,
            societies: None,
        })
    }

    /// Monte Carlo societies: the regressor is each society's closed-form Gini.
    pub fn from_societies(id: impl Into<String>, societies: &[ParetoSociety]) -> Result<Self> {
        let mut keys = Vec::new();
        let mut lorenz = Vec::new();
        for (i, s) in societies.iter().enumerate() {
            let label = format!("society-{:04}", i + 1);
            keys.push(UnitKey::new(label.clone(), 0));
            lorenz.push(s.discretize(label, 0)?.lorenz_curve());
        }
        Ok(CrossSection {
            id: id.into(),
            kind: InequalityKind::Gini,
            keys,
            inequality: societies.iter().map(ParetoSociety::gini_closed_form).collect(),
            lorenz,
            societies: Some(societies.to_vec()),
        })
    }

    /// Replaces the regressor, e.g. with an externally supplied index.
    pub fn with_regressor(mut self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.len() {
            return Err(Error::domain(format!(
                "regressor has {} values for {} units",
                values.len(),
                self.len()
            )));
        }
        self.inequality = values;
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> InequalityKind {
        self.kind
    }

    pub fn keys(&self) -> &[UnitKey] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn inequality(&self) -> &[f64] {
        &self.inequality
    }

    pub fn is_continuous(&self) -> bool {
        self.societies.is_some()
    }

    /// `S(p, q)` for every unit.
    pub fn shares(&self, iv: QuantileInterval) -> Vec<f64> {
        let (p, q) = (iv.p() as usize, iv.q() as usize);
        self.lorenz.iter().map(|l| l[q] - l[p]).collect()
    }

    /// `S(p, q)` for every unit at fractional percentile bounds in `[0, 100]`.
    pub fn shares_at(&self, p: f64, q: f64) -> Result<Vec<f64>> {
        if !(0.0..=100.0).contains(&p) || !(0.0..=100.0).contains(&q) || p > q {
            return Err(Error::domain(format!("bad fractional interval ({p}, {q})")));
        }
        Ok(match &self.societies {
            Some(soc) => soc
                .iter()
                .map(|s| s.clipped_share(p / 100.0, q / 100.0))
                .collect(),
            None => self
                .lorenz
                .iter()
                .map(|l| lorenz_at(l, q) - lorenz_at(l, p))
                .collect(),
        })
    }

    /// Sub-sample of the units selected by `keep`.
    pub fn subset(&self, id: impl Into<String>, keep: impl Fn(&UnitKey) -> bool) -> CrossSection {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(&self.keys[i])).collect();
        CrossSection {
            id: id.into(),
            kind: self.kind,
            keys: idx.iter().map(|&i| self.keys[i].clone()).collect(),
            inequality: idx.iter().map(|&i| self.inequality[i]).collect(),
            lorenz: idx.iter().map(|&i| self.lorenz[i]).collect(),
            societies: self
                .societies
                .as_ref()
                .map(|s| idx.iter().map(|&i| s[i]).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractional_shares_agree_with_integer_shares() {
        let soc = vec![
            ParetoSociety::from_gini(0.35, 0.12).unwrap(),
            ParetoSociety::from_gini(0.45, 0.18).unwrap(),
        ];
        let cs = CrossSection::from_societies("t", &soc).unwrap();
        let iv = QuantileInterval::new(49, 99).unwrap();
        let a = cs.shares(iv);
        let b = cs.shares_at(49.0, 99.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        let dists: Vec<_> = soc.iter().map(|s| s.discretize("d", 0).unwrap()).collect();
        let lin = CrossSection::from_distributions("l", InequalityKind::Gini, &dists).unwrap();
        let c = lin.shares_at(49.0, 99.0).unwrap();
        for (x, y) in a.iter().zip(&c) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn subset_keeps_alignment() {
        let dists = vec![
            PercentileDistribution::uniform("A", 1),
            PercentileDistribution::uniform("B", 1),
        ];
        let cs = CrossSection::from_distributions("x", InequalityKind::Gini, &dists).unwrap();
        let b = cs.subset("b", |k| k.country == "B");
        assert_eq!(b.len(), 1);
        assert_eq!(b.keys()[0].country, "B");
    }
}

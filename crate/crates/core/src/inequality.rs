//! Inequality indices computed from percentile shares.
//!
//! Each percentile is treated as a homogeneous group holding its share, so
//! its income relative to the mean is `100 * share`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distribution::{PercentileDistribution, PERCENTILES};
use crate::error::{Error, Result};

/// Default Atkinson inequality-aversion parameter.
pub const DEFAULT_ATKINSON_EPSILON: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InequalityKind {
    Gini,
    Atkinson { epsilon: f64 },
    Theil,
}

impl InequalityKind {
    pub fn atkinson(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::domain(format!("Atkinson epsilon must be > 0, got {epsilon}")));
        }
        Ok(InequalityKind::Atkinson { epsilon })
    }

    /// Evaluates the index on one distribution.
    pub fn evaluate(&self, dist: &PercentileDistribution) -> Result<f64> {
        match *self {
            InequalityKind::Gini => Ok(gini_from_shares(dist)),
            InequalityKind::Atkinson { epsilon } => atkinson_from_shares(dist, epsilon),
            InequalityKind::Theil => Ok(theil_from_shares(dist)),
        }
    }

    /// Upper end of the index's range on 100 groups.
    pub fn max_value(&self) -> f64 {
        match self {
            InequalityKind::Gini => 0.99,
            InequalityKind::Atkinson { .. } => 1.0,
            InequalityKind::Theil => (PERCENTILES as f64).ln(),
        }
    }
}

impl fmt::Display for InequalityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InequalityKind::Gini => f.write_str("gini"),
            InequalityKind::Atkinson { epsilon } => write!(f, "atkinson({epsilon})"),
            InequalityKind::Theil => f.write_str("theil"),
        }
    }
}

impl FromStr for InequalityKind {
    type Err = Error;

    /// `gini`, `theil`, `atkinson` (default epsilon) or `atkinson:<eps>`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "gini" => Ok(InequalityKind::Gini),
            "theil" => Ok(InequalityKind::Theil),
            "atkinson" => Ok(InequalityKind::Atkinson {
                epsilon: DEFAULT_ATKINSON_EPSILON,
            }),
            other => match other.strip_prefix("atkinson:") {
                Some(eps) => {
                    let eps: f64 = eps
                        .parse()
                        .map_err(|_| Error::domain(format!("bad Atkinson epsilon `{eps}`")))?;
                    InequalityKind::atkinson(eps)
                }
                None => Err(Error::domain(format!("unknown inequality measure `{s}`"))),
            },
        }
    }
}

/// A computed index value tagged with its kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityMeasure {
    pub kind: InequalityKind,
    pub value: f64,
}

impl InequalityMeasure {
    pub fn compute(kind: InequalityKind, dist: &PercentileDistribution) -> Result<Self> {
        Ok(InequalityMeasure {
            kind,
            value: kind.evaluate(dist)?,
        })
    }
}

/// Gini as one minus twice the trapezoidal area under the Lorenz curve.
pub fn gini_from_shares(dist: &PercentileDistribution) -> f64 {
    let l = dist.lorenz_curve();
    let n = PERCENTILES as f64;
    let area: f64 = l.windows(2).map(|w| (w[0] + w[1]) / (2.0 * n)).sum();
    (1.0 - 2.0 * area).max(0.0)
}

/// Atkinson index with aversion `epsilon`: one minus the generalized mean
/// of order `1 - epsilon` of the relative incomes.
///
/// Any zero-income percentile drives the index to 1 when `epsilon >= 1`.
pub fn atkinson_from_shares(dist: &PercentileDistribution, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::domain(format!("Atkinson epsilon must be > 0, got {epsilon}")));
    }
    let n = PERCENTILES as f64;
    let rel = dist.shares().iter().map(|s| s * n);
    if epsilon >= 1.0 && dist.shares().contains(&0.0) {
        return Ok(1.0);
    }
    let ede = if (epsilon - 1.0).abs() < 1e-12 {
        (rel.map(f64::ln).sum::<f64>() / n).exp()
    } else {
        let r = 1.0 - epsilon;
        (rel.map(|x| x.powf(r)).sum::<f64>() / n).powf(1.0 / r)
    };
    Ok((1.0 - ede).clamp(0.0, 1.0))
}

/// Theil T index, `sum s_k ln(100 s_k)` with `0 ln 0 = 0`.
pub fn theil_from_shares(dist: &PercentileDistribution) -> f64 {
    let n = PERCENTILES as f64;
    dist.shares()
        .iter()
        .filter(|&&s| s > 0.0)
        .map(|&s| s * (n * s).ln())
        .sum::<f64>()
        .max(0.0)
}

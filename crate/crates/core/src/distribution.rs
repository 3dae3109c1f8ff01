//! Percentile income distributions and the interval arithmetic built on them.
//!
//! Percentile `k` (1-based) covers the population slice `](k-1)/100, k/100]`,
//! so the interval `(p, q)` holds percentiles `p+1 ..= q`.
//!
//! Shares are stored on a dyadic grid: every share is an integer multiple of
//! 2^-52 and the 100 shares sum to exactly 1. All partial sums are therefore
//! representable, which makes interval shares exactly additive and
//! `S(0, 100) == 1.0` bit for bit.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PERCENTILES: usize = 100;

/// Default tolerance on `|sum(shares) - 1|` for raw input.
pub const SUM_TOLERANCE: f64 = 1e-6;

const GRID_BITS: i32 = 52;
const GRID_TOTAL: u64 = 1 << GRID_BITS;

/// A percentile interval `(p, q)` with `0 <= p < q <= 100`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "(u32, u32)", into = "(u32, u32)")]
pub struct QuantileInterval {
    p: u8,
    q: u8,
}

impl QuantileInterval {
    pub const FULL: QuantileInterval = QuantileInterval { p: 0, q: 100 };

    pub fn new(p: u32, q: u32) -> Result<Self> {
        if p >= q || q as usize > PERCENTILES {
            return Err(Error::InvalidInterval {
                p: p as i64,
                q: q as i64,
            });
        }
        Ok(QuantileInterval {
            p: p as u8,
            q: q as u8,
        })
    }

    /// Interval of size `m` starting at `p`.
    pub fn with_size(p: u32, m: u32) -> Result<Self> {
        Self::new(p, p + m)
    }

    pub fn p(&self) -> u32 {
        self.p as u32
    }

    pub fn q(&self) -> u32 {
        self.q as u32
    }

    /// Size `M = q - p`.
    pub fn size(&self) -> u32 {
        (self.q - self.p) as u32
    }

    /// Whether 1-based percentile `k` lies inside the interval.
    pub fn contains_percentile(&self, k: u32) -> bool {
        k > self.p() && k <= self.q()
    }
}

impl TryFrom<(u32, u32)> for QuantileInterval {
    type Error = Error;

    fn try_from((p, q): (u32, u32)) -> Result<Self> {
        QuantileInterval::new(p, q)
    }
}

impl From<QuantileInterval> for (u32, u32) {
    fn from(iv: QuantileInterval) -> Self {
        (iv.p(), iv.q())
    }
}

impl fmt::Display for QuantileInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.p, self.q)
    }
}

impl std::str::FromStr for QuantileInterval {
    type Err = Error;

    /// Accepts `p:q`, `p,q` or `(p,q)`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches('(').trim_end_matches(')');
        let mut it = t.split([':', ',']);
        let parse = |v: Option<&str>| -> Result<u32> {
            v.and_then(|x| x.trim().parse().ok())
                .ok_or_else(|| Error::domain(format!("cannot parse interval `{s}`")))
        };
        let p = parse(it.next())?;
        let q = parse(it.next())?;
        if it.next().is_some() {
            return Err(Error::domain(format!("cannot parse interval `{s}`")));
        }
        QuantileInterval::new(p, q)
    }
}

/// Poor / middle / rich income shares implied by a middle-class interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassDecomposition {
    pub poor_share: f64,
    pub middle_share: f64,
    pub rich_share: f64,
}

/// One country-year's income distribution by percentile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileDistribution {
    country: String,
    year: i32,
    shares: Vec<f64>,
    mean_incomes: Option<Vec<f64>>,
    clamped: bool,
}

impl PercentileDistribution {
    /// Validates and normalizes 100 raw shares.
    ///
    /// Negative shares are clamped to zero (and the unit flagged), then the
    /// vector is renormalized exactly onto the dyadic grid.
    pub fn new(
        country: impl Into<String>,
        year: i32,
        shares: &[f64],
        mean_incomes: Option<Vec<f64>>,
    ) -> Result<Self> {
        Self::with_tolerance(country, year, shares, mean_incomes, SUM_TOLERANCE)
    }

    pub fn with_tolerance(
        country: impl Into<String>,
        year: i32,
        shares: &[f64],
        mean_incomes: Option<Vec<f64>>,
        sum_tolerance: f64,
    ) -> Result<Self> {
        let country = country.into();
        if shares.len() != PERCENTILES {
            return Err(Error::domain(format!(
                "{country} {year}: expected {PERCENTILES} shares, got {}",
                shares.len()
            )));
        }
        if let Some(s) = shares.iter().find(|s| !s.is_finite()) {
            return Err(Error::domain(format!("{country} {year}: non-finite share {s}")));
        }
        let raw_sum: f64 = shares.iter().sum();
        if (raw_sum - 1.0).abs() > sum_tolerance {
            return Err(Error::domain(format!(
                "{country} {year}: shares sum to {raw_sum}, not 1 (tolerance {sum_tolerance})"
            )));
        }
        let clamped = shares.iter().any(|&s| s < 0.0);
        let positive: Vec<f64> = shares.iter().map(|&s| s.max(0.0)).collect();
        let shares = snap_to_grid(&positive)?;

        if let Some(m) = &mean_incomes {
            validate_mean_incomes(&country, year, m)?;
        }
        Ok(PercentileDistribution {
            country,
            year,
            shares,
            mean_incomes,
            clamped,
        })
    }

    /// Restores a distribution whose shares are already on the grid.
    pub(crate) fn from_stored(
        country: String,
        year: i32,
        shares: Vec<f64>,
        mean_incomes: Option<Vec<f64>>,
        clamped: bool,
    ) -> Result<Self> {
        let ok = shares.len() == PERCENTILES
            && shares.iter().all(|&s| s >= 0.0 && (s * GRID_TOTAL as f64).fract() == 0.0)
            && shares.iter().sum::<f64>() == 1.0;
        if !ok {
            return Err(Error::Integrity(format!(
                "{country} {year}: stored shares are not a normalized distribution"
            )));
        }
        Ok(PercentileDistribution {
            country,
            year,
            shares,
            mean_incomes,
            clamped,
        })
    }

    /// Builds a distribution from non-negative weights of arbitrary total.
    pub fn from_weights(country: impl Into<String>, year: i32, weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::domain("weights must have a positive total"));
        }
        let scaled: Vec<f64> = weights.iter().map(|w| w / total).collect();
        Self::new(country, year, &scaled, None)
    }

    /// Uniform distribution, every percentile holding 1/100.
    pub fn uniform(country: impl Into<String>, year: i32) -> Self {
        Self::new(country, year, &[0.01; PERCENTILES], None).expect("uniform shares are valid")
    }

    pub fn country(&self) -> &str {
        &self.country
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    /// Share of percentile `k` is `shares()[k - 1]`.
    pub fn shares(&self) -> &[f64] {
        &self.shares
    }

    pub fn mean_incomes(&self) -> Option<&[f64]> {
        self.mean_incomes.as_deref()
    }

    /// True when any raw share was negative and clamped to zero.
    pub fn was_clamped(&self) -> bool {
        self.clamped
    }

    pub fn with_mean_incomes(mut self, mean_incomes: Vec<f64>) -> Result<Self> {
        validate_mean_incomes(&self.country, self.year, &mean_incomes)?;
        self.mean_incomes = Some(mean_incomes);
        Ok(self)
    }

    /// `S(p, q)`: sum of the shares of percentiles `p+1 ..= q`.
    pub fn interval_share(&self, iv: QuantileInterval) -> f64 {
        self.shares[iv.p() as usize..iv.q() as usize].iter().sum()
    }

    /// Cumulative shares `L[0..=100]`, `L[k]` = share of the poorest `k` percentiles.
    pub fn lorenz_curve(&self) -> [f64; PERCENTILES + 1] {
        let mut l = [0.0; PERCENTILES + 1];
        for k in 0..PERCENTILES {
            l[k + 1] = l[k] + self.shares[k];
        }
        l
    }

    /// Interval share at fractional percentile bounds, treating each
    /// percentile as internally equal (piecewise-linear Lorenz curve).
    pub fn interval_share_at(&self, p: f64, q: f64) -> Result<f64> {
        if !(0.0..=100.0).contains(&p) || !(0.0..=100.0).contains(&q) || p > q {
            return Err(Error::domain(format!("bad fractional interval ({p}, {q})")));
        }
        let l = self.lorenz_curve();
        Ok(lorenz_at(&l, q) - lorenz_at(&l, p))
    }

    pub fn class_decomposition(&self, middle: QuantileInterval) -> ClassDecomposition {
        let l = self.lorenz_curve();
        let (p, q) = (middle.p() as usize, middle.q() as usize);
        ClassDecomposition {
            poor_share: l[p],
            middle_share: l[q] - l[p],
            rich_share: l[PERCENTILES] - l[q],
        }
    }

    /// Percentile interval of incomes between `lo_frac` and `hi_frac` times
    /// the median, where the median is the mean income of percentile 50.
    pub fn relative_income_interval(&self, lo_frac: f64, hi_frac: f64) -> Result<QuantileInterval> {
        let incomes = self.mean_incomes.as_deref().ok_or_else(|| {
            Error::Unsupported(format!(
                "{} {}: relative-income classes need per-percentile mean incomes",
                self.country, self.year
            ))
        })?;
        if !(lo_frac > 0.0 && hi_frac > lo_frac) {
            return Err(Error::domain(format!(
                "relative-income bounds need 0 < lo < hi, got ({lo_frac}, {hi_frac})"
            )));
        }
        let median = incomes[49];
        let (lo, hi) = (lo_frac * median, hi_frac * median);
        let inside: Vec<usize> = (1..=PERCENTILES)
            .filter(|&k| incomes[k - 1] >= lo && incomes[k - 1] <= hi)
            .collect();
        match (inside.first(), inside.last()) {
            (Some(&first), Some(&last)) if last > first => {
                QuantileInterval::new(first as u32 - 1, last as u32)
            }
            _ => Err(Error::domain(format!(
                "{} {}: fewer than two percentiles between {lo} and {hi}",
                self.country, self.year
            ))),
        }
    }
}

pub(crate) fn lorenz_at(l: &[f64; PERCENTILES + 1], x: f64) -> f64 {
    let k = (x.floor() as usize).min(PERCENTILES - 1);
    let frac = x - k as f64;
    l[k] + frac * (l[k + 1] - l[k])
}

fn validate_mean_incomes(country: &str, year: i32, m: &[f64]) -> Result<()> {
    if m.len() != PERCENTILES {
        return Err(Error::domain(format!(
            "{country} {year}: expected {PERCENTILES} mean incomes, got {}",
            m.len()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(format!("{country} {year}: non-finite mean income")));
    }
    let scale = m.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    for k in 1..PERCENTILES {
        if m[k] < m[k - 1] - 1e-6 * scale {
            return Err(Error::domain(format!(
                "{country} {year}: mean incomes decrease at percentile {}",
                k + 1
            )));
        }
    }
    Ok(())
}

/// Rescales non-negative values to sum to one, rounding each onto the 2^-52
/// grid with largest-remainder allocation so the grid units total exactly 2^52.
fn snap_to_grid(values: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::domain("distribution has no positive income"));
    }
    let scale = GRID_TOTAL as f64;
    let exact: Vec<f64> = values.iter().map(|v| v / total * scale).collect();
    let mut units: Vec<u64> = exact.iter().map(|x| x.floor() as u64).collect();
    let assigned: u64 = units.iter().sum();

    // order by descending remainder, index ascending on ties
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    if assigned < GRID_TOTAL {
        let mut deficit = GRID_TOTAL - assigned;
        for &i in order.iter().cycle() {
            if deficit == 0 {
                break;
            }
            if values[i] > 0.0 {
                units[i] += 1;
                deficit -= 1;
            }
        }
    } else {
        let mut excess = assigned - GRID_TOTAL;
        for &i in order.iter().rev().cycle() {
            if excess == 0 {
                break;
            }
            if units[i] > 0 {
                units[i] -= 1;
                excess -= 1;
            }
        }
    }
    let unit = (2.0_f64).powi(-GRID_BITS);
    Ok(units.into_iter().map(|u| u as f64 * unit).collect())
}

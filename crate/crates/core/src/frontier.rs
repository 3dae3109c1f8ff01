//! The beta surface over the interval triangle and the middle-class solvers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::{QuantileInterval, PERCENTILES};
use crate::error::{Error, Result};
use crate::inequality::InequalityKind;
use crate::optimize::golden_section_min;
use crate::regression::{fit_line, poly_ols};
use crate::sample::CrossSection;

const HUNDRED: u32 = PERCENTILES as u32;

/// Lower bounds allowed for country-by-country solutions.
pub const COUNTRY_P_BOUNDS: (u32, u32) = (1, 49);

/// One fitted interval of a [`BetaSurface`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub interval: QuantileInterval,
    pub alpha: f64,
    pub beta: f64,
    pub beta_se: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetaSurface {
    pub grid: Vec<SurfacePoint>,
    pub grid_step: u32,
    pub inequality_kind: InequalityKind,
    pub sample_id: String,
}

impl BetaSurface {
    pub fn get(&self, p: u32, q: u32) -> Option<&SurfacePoint> {
        self.grid
            .binary_search_by_key(&(p, q), |s| (s.interval.p(), s.interval.q()))
            .ok()
            .map(|i| &self.grid[i])
    }

    pub fn beta(&self, p: u32, q: u32) -> Option<f64> {
        self.get(p, q).map(|s| s.beta)
    }
}

/// Fits `S(p,q) = alpha + beta * I` for every interval whose bounds are
/// multiples of `grid_step`.
pub fn beta_map(sample: &CrossSection, grid_step: u32) -> Result<BetaSurface> {
    if grid_step == 0 || HUNDRED % grid_step != 0 {
        return Err(Error::Config(format!(
            "grid step must divide 100, got {grid_step}"
        )));
    }
    if sample.len() < 3 {
        return Err(Error::domain(format!(
            "a beta map needs at least 3 units, got {}",
            sample.len()
        )));
    }
    let intervals: Vec<QuantileInterval> = (0..HUNDRED)
        .step_by(grid_step as usize)
        .flat_map(|p| {
            ((p + grid_step)..=HUNDRED)
                .step_by(grid_step as usize)
                .map(move |q| QuantileInterval::new(p, q).expect("grid interval"))
        })
        .collect();
    let x = sample.inequality();
    let grid = intervals
        .par_iter()
        .map(|&iv| {
            let f = fit_line(&sample.shares(iv), x)?;
            Ok(SurfacePoint {
                interval: iv,
                alpha: f.alpha,
                beta: f.beta,
                beta_se: f.beta_se,
                r_squared: f.r_squared,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BetaSurface {
        grid,
        grid_step,
        inequality_kind: sample.kind(),
        sample_id: sample.id().to_string(),
    })
}

/// Where `beta(p, .)` changes sign for one lower bound `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub p: u32,
    pub q_star: Option<f64>,
}

/// For each grid lower bound, the first `q` at which beta changes sign,
/// interpolated linearly between adjacent grid points.
pub fn zero_frontier(surface: &BetaSurface) -> Vec<FrontierPoint> {
    let mut rows: BTreeMap<u32, Vec<(u32, f64)>> = BTreeMap::new();
    for s in &surface.grid {
        rows.entry(s.interval.p())
            .or_default()
            .push((s.interval.q(), s.beta));
    }
    rows.into_iter()
        .map(|(p, row)| FrontierPoint {
            p,
            q_star: first_crossing(&row),
        })
        .collect()
}

fn first_crossing(row: &[(u32, f64)]) -> Option<f64> {
    if let Some(&(q, b)) = row.first() {
        if b == 0.0 {
            return Some(q as f64);
        }
    }
    row.windows(2).find_map(|w| {
        let ((q0, b0), (q1, b1)) = (w[0], w[1]);
        if b1 == 0.0 {
            Some(q1 as f64)
        } else if b0.signum() != b1.signum() {
            Some(q0 as f64 + (q1 - q0) as f64 * b0 / (b0 - b1))
        } else {
            None
        }
    })
}

/// What the middle-class solver minimizes over candidate intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    BetaSquared,
    RSquared { degree: usize },
}

impl Objective {
    /// Objective value for shares `s` against regressor `x`.
    pub fn evaluate(&self, s: &[f64], x: &[f64]) -> Result<f64> {
        match *self {
            Objective::BetaSquared => Ok(fit_line(s, x)?.beta.powi(2)),
            Objective::RSquared { degree: 1 } => Ok(fit_line(s, x)?.r_squared),
            Objective::RSquared { degree } => Ok(poly_ols(s, x, degree)?.r_squared),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::BetaSquared => f.write_str("beta_squared"),
            Objective::RSquared { degree } => write!(f, "r_squared({degree})"),
        }
    }
}

impl FromStr for Objective {
    type Err = Error;

    /// Accepts `beta2`, `beta_squared`, `r2`, `r2:<degree>` or `r_squared(<degree>)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let bad = || Error::Config(format!("unknown objective `{s}`"));
        if s == "beta2" || s == "beta_squared" {
            return Ok(Objective::BetaSquared);
        }
        if s == "r2" || s == "r_squared" {
            return Ok(Objective::RSquared { degree: 1 });
        }
        let degree = if let Some(d) = s.strip_prefix("r2:") {
            d
        } else if let Some(d) = s.strip_prefix("r_squared(").and_then(|d| d.strip_suffix(')')) {
            d
        } else {
            return Err(bad());
        };
        let degree: usize = degree.parse().map_err(|_| bad())?;
        if degree == 0 {
            return Err(bad());
        }
        Ok(Objective::RSquared { degree })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiddleClassSolution {
    pub interval: QuantileInterval,
    pub objective: Objective,
    pub objective_value: f64,
    pub sample_id: String,
    pub size_m: u32,
}

fn feasible_range(m: u32, p_bounds: Option<(u32, u32)>) -> Result<(u32, u32)> {
    if !(1..=HUNDRED).contains(&m) {
        return Err(Error::Config(format!("class size must be in 1..=100, got {m}")));
    }
    let (lo, hi) = p_bounds.unwrap_or((0, HUNDRED - m));
    let hi = hi.min(HUNDRED - m);
    if lo > hi {
        return Err(Error::Config(format!(
            "no feasible lower bound for M={m} within {:?}",
            p_bounds.unwrap_or((0, HUNDRED - m))
        )));
    }
    Ok((lo, hi))
}

/// Exhaustive search over integer lower bounds for the size-`m` interval
/// minimizing `objective`. Ties go to the smallest `p`.
pub fn solve_middle_class(
    sample: &CrossSection,
    m: u32,
    objective: Objective,
    p_bounds: Option<(u32, u32)>,
) -> Result<MiddleClassSolution> {
    let (lo, hi) = feasible_range(m, p_bounds)?;
    let x = sample.inequality();
    let values = (lo..=hi)
        .into_par_iter()
        .map(|p| {
            let iv = QuantileInterval::with_size(p, m)?;
            objective.evaluate(&sample.shares(iv), x).map(|v| (iv, v))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = values[0];
    for &(iv, v) in &values[1..] {
        if v.is_nan() {
            return Err(Error::domain(format!("objective is NaN at {iv}")));
        }
        if v < best.1 {
            best = (iv, v);
        }
    }
    Ok(MiddleClassSolution {
        interval: best.0,
        objective,
        objective_value: best.1,
        sample_id: sample.id().to_string(),
        size_m: m,
    })
}

/// Fractional lower bound of a size-`m` class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedBound {
    pub integer: MiddleClassSolution,
    pub p_star: f64,
    pub objective_value: f64,
}

/// Golden-section refinement of the objective over one percentile either
/// side of the integer solution.
pub fn refine_continuous(sample: &CrossSection, m: u32, objective: Objective) -> Result<RefinedBound> {
    let integer = solve_middle_class(sample, m, objective, None)?;
    let p0 = integer.interval.p() as f64;
    let lo = (p0 - 1.0).max(0.0);
    let hi = (p0 + 1.0).min((HUNDRED - m) as f64);
    let x = sample.inequality();
    let mfrac = m as f64;
    let mut failure = None;
    let (p_star, value) = golden_section_min(
        |p| {
            match sample
                .shares_at(p, (p + mfrac).min(100.0))
                .and_then(|s| objective.evaluate(&s, x))
            {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::INFINITY
                }
            }
        },
        lo,
        hi,
        1e-7,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(RefinedBound {
        integer,
        p_star,
        objective_value: value,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SizeSweep {
    pub solutions: Vec<MiddleClassSolution>,
    /// Percentiles that belong to every solution.
    pub common_percentiles: Vec<u32>,
}

/// One solution for each class size in `m_lo..=m_hi`.
pub fn m_size_sweep(sample: &CrossSection, m_lo: u32, m_hi: u32, objective: Objective) -> Result<SizeSweep> {
    if m_lo == 0 || m_lo > m_hi || m_hi > HUNDRED {
        return Err(Error::Config(format!(
            "need 1 <= M_lo <= M_hi <= 100, got {m_lo}..{m_hi}"
        )));
    }
    let solutions = (m_lo..=m_hi)
        .map(|m| solve_middle_class(sample, m, objective, None))
        .collect::<Result<Vec<_>>>()?;
    let common_percentiles = (1..=HUNDRED)
        .filter(|&k| solutions.iter().all(|s| s.interval.contains_percentile(k)))
        .collect();
    Ok(SizeSweep {
        solutions,
        common_percentiles,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedCountry {
    pub country: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountryClasses {
    pub size_m: u32,
    pub objective: Objective,
    pub p_bounds: (u32, u32),
    pub solutions: BTreeMap<String, MiddleClassSolution>,
    pub skipped: Vec<SkippedCountry>,
}

impl CountryClasses {
    pub fn mean_initial_percentile(&self) -> Option<f64> {
        if self.solutions.is_empty() {
            return None;
        }
        let sum: u32 = self.solutions.values().map(|s| s.interval.p()).sum();
        Some(sum as f64 / self.solutions.len() as f64)
    }

    /// Share of solved countries whose class starts at `p`.
    pub fn fraction_at(&self, p: u32) -> Option<f64> {
        if self.solutions.is_empty() {
            return None;
        }
        let n = self.solutions.values().filter(|s| s.interval.p() == p).count();
        Some(n as f64 / self.solutions.len() as f64)
    }

    /// Count of countries per initial percentile, leaving out `exclude`.
    pub fn histogram(&self, exclude: &[&str]) -> BTreeMap<u32, usize> {
        let skip: BTreeSet<&str> = exclude.iter().copied().collect();
        let mut out = BTreeMap::new();
        for (c, s) in &self.solutions {
            if !skip.contains(c.as_str()) {
                *out.entry(s.interval.p()).or_insert(0) += 1;
            }
        }
        out
    }

    /// Frozen country to interval map.
    pub fn intervals(&self) -> BTreeMap<String, QuantileInterval> {
        self.solutions
            .iter()
            .map(|(c, s)| (c.clone(), s.interval))
            .collect()
    }
}

/// Solves the size-`m` class separately for each country's time series.
///
/// Countries with fewer than three years or a constant inequality series
/// are listed in `skipped` rather than failing the run.
pub fn country_specific_classes(
    sample: &CrossSection,
    m: u32,
    objective: Objective,
    p_bounds: Option<(u32, u32)>,
) -> Result<CountryClasses> {
    let bounds = p_bounds.unwrap_or(COUNTRY_P_BOUNDS);
    feasible_range(m, Some(bounds))?;
    let countries: BTreeSet<&str> = sample.keys().iter().map(|k| k.country.as_str()).collect();
    let results: Vec<(String, std::result::Result<MiddleClassSolution, String>)> = countries
        .into_par_iter()
        .map(|c| {
            let sub = sample.subset(format!("{}/{}", sample.id(), c), |k| k.country == c);
            let res = if sub.len() < 3 {
                Err(format!("{} years, need at least 3", sub.len()))
            } else if sub.inequality().iter().all(|&v| v == sub.inequality()[0]) {
                Err("constant inequality series".to_string())
            } else {
                solve_middle_class(&sub, m, objective, Some(bounds)).map_err(|e| e.to_string())
            };
            (c.to_string(), res)
        })
        .collect();
    let mut solutions = BTreeMap::new();
    let mut skipped = Vec::new();
    for (country, res) in results {
        match res {
            Ok(s) => {
                solutions.insert(country, s);
            }
            Err(reason) => {
                log::warn!("country {country} skipped: {reason}");
                skipped.push(SkippedCountry { country, reason });
            }
        }
    }
    Ok(CountryClasses {
        size_m: m,
        objective,
        p_bounds: bounds,
        solutions,
        skipped,
    })
}

//! Zero-inflated Pareto societies.
//!
//! A mass `nu` of the population has zero income; the rest follows a Pareto
//! law with tail exponent `alpha > 1` and scale `y_m`. The Lorenz curve is
//! `L(u) = 1 - ((1-u)/(1-nu))^e` for `u > nu` (zero below), with
//! `e = 1 - 1/alpha`. Integrating it gives `G = nu + (1-nu)/(2 alpha - 1)`,
//! and substituting back yields the share exponent `e = (1-G)/(1+G-2 nu)`.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::distribution::{PercentileDistribution, PERCENTILES};
use crate::error::{Error, Result};

/// Seed used when the caller does not pick one.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoSociety {
    nu: f64,
    alpha: f64,
    y_m: f64,
}

impl ParetoSociety {
    pub fn new(nu: f64, alpha: f64, y_m: f64) -> Result<Self> {
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::domain(format!("nu must lie in (0,1), got {nu}")));
        }
        if !(alpha > 1.0) || !alpha.is_finite() {
            return Err(Error::domain(format!("alpha must be finite and > 1, got {alpha}")));
        }
        if !(y_m > 0.0) || !y_m.is_finite() {
            return Err(Error::domain(format!("y_m must be positive, got {y_m}")));
        }
        Ok(ParetoSociety { nu, alpha, y_m })
    }

    /// Society with a given Gini and zero-income mass (unit scale).
    pub fn from_gini(gini: f64, nu: f64) -> Result<Self> {
        Self::new(nu, alpha_from_gini(gini, nu)?, 1.0)
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn y_m(&self) -> f64 {
        self.y_m
    }

    pub fn with_scale(self, y_m: f64) -> Result<Self> {
        Self::new(self.nu, self.alpha, y_m)
    }

    pub fn gini_closed_form(&self) -> f64 {
        self.nu + (1.0 - self.nu) / (2.0 * self.alpha - 1.0)
    }

    /// `e = 1 - 1/alpha`, the exponent of the share formula.
    pub fn share_exponent(&self) -> f64 {
        1.0 - 1.0 / self.alpha
    }

    pub fn mean_income(&self) -> f64 {
        (1.0 - self.nu) * self.alpha * self.y_m / (self.alpha - 1.0)
    }

    /// Income at population rank `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= self.nu {
            0.0
        } else {
            self.y_m * ((1.0 - self.nu) / (1.0 - u)).powf(1.0 / self.alpha)
        }
    }

    /// Closed-form Lorenz curve at rank `u` in `[0, 1]`.
    pub fn lorenz(&self, u: f64) -> f64 {
        if u <= self.nu {
            0.0
        } else if u >= 1.0 {
            1.0
        } else {
            1.0 - ((1.0 - u) / (1.0 - self.nu)).powf(self.share_exponent())
        }
    }

    /// `S(p, q)` for population fractions `nu <= p <= q <= 1`.
    pub fn interval_share(&self, p: f64, q: f64) -> Result<f64> {
        if p < self.nu {
            return Err(Error::domain(format!(
                "lower bound {p} lies inside the zero-income mass (nu = {})",
                self.nu
            )));
        }
        if !(p <= q && q <= 1.0) {
            return Err(Error::domain(format!("need p <= q <= 1, got ({p}, {q})")));
        }
        if p == q {
            return Ok(0.0);
        }
        let e = self.share_exponent();
        let base = 1.0 - self.nu;
        Ok(((1.0 - p) / base).powf(e) - ((1.0 - q) / base).powf(e))
    }

    /// Interval share with both bounds clipped up to `nu`.
    pub fn clipped_share(&self, p: f64, q: f64) -> f64 {
        let p = p.max(self.nu);
        let q = q.max(self.nu).max(p);
        self.interval_share(p, q).unwrap_or(0.0)
    }

    /// Percentile shares `S((k-1)/100, k/100)`, with mean incomes attached.
    pub fn discretize(&self, country: impl Into<String>, year: i32) -> Result<PercentileDistribution> {
        let n = PERCENTILES as f64;
        let l: Vec<f64> = (0..=PERCENTILES).map(|k| self.lorenz(k as f64 / n)).collect();
        let shares: Vec<f64> = l.windows(2).map(|w| w[1] - w[0]).collect();
        let mean = self.mean_income();
        let dist = PercentileDistribution::new(country, year, &shares, None)?;
        let incomes: Vec<f64> = dist.shares().iter().map(|s| s * n * mean).collect();
        dist.with_mean_incomes(incomes)
    }
}

/// Tail exponent implied by a Gini and zero-income mass; exact inverse of
/// [`ParetoSociety::gini_closed_form`].
pub fn alpha_from_gini(gini: f64, nu: f64) -> Result<f64> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::domain(format!("nu must lie in (0,1), got {nu}")));
    }
    if !(gini > nu && gini < 1.0) {
        return Err(Error::domain(format!(
            "infeasible Gini {gini} for nu = {nu}: need nu < G < 1"
        )));
    }
    Ok((1.0 + gini - 2.0 * nu) / (2.0 * (gini - nu)))
}

/// Share exponent written in terms of the Gini: `(1-G)/(1+G-2 nu)`.
pub fn share_exponent_from_gini(gini: f64, nu: f64) -> f64 {
    (1.0 - gini) / (1.0 + gini - 2.0 * nu)
}

/// Gini formula as printed in the source text, `nu + (1+nu)/(2 alpha - 1)`.
///
/// Kept for comparison only; it disagrees with the integrated Lorenz curve.
pub fn literal_gini(nu: f64, alpha: f64) -> f64 {
    nu + (1.0 + nu) / (2.0 * alpha - 1.0)
}

/// Share exponent as printed in the source text, `(1-G)/(1+G+2 nu)`.
pub fn literal_share_exponent(gini: f64, nu: f64) -> f64 {
    (1.0 - gini) / (1.0 + gini + 2.0 * nu)
}

/// Gini by trapezoidal integration of the exact Lorenz curve.
///
/// The curve is zero on `[0, nu]`. On `(nu, 1]` the substitution
/// `1 - u = (1 - nu) t^4` removes the unbounded slope at `u = 1`, so the
/// trapezoid rule over `grid_points` panels in `t` converges at O(h^2).
pub fn numeric_gini_oracle(society: &ParetoSociety, grid_points: usize) -> Result<f64> {
    if grid_points < 10_000 {
        return Err(Error::domain(format!(
            "numeric Gini oracle needs at least 10^4 grid points, got {grid_points}"
        )));
    }
    let nu = society.nu();
    let integrand = |t: f64| {
        let u = 1.0 - (1.0 - nu) * t.powi(4);
        society.lorenz(u) * 4.0 * (1.0 - nu) * t.powi(3)
    };
    let h = 1.0 / grid_points as f64;
    let mut area = 0.5 * (integrand(0.0) + integrand(1.0));
    for i in 1..grid_points {
        area += integrand(i as f64 * h);
    }
    area *= h;
    Ok(1.0 - 2.0 * area)
}

/// Parameters of the Monte Carlo draw of societies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub n_societies: usize,
    pub gini_mean: f64,
    pub gini_sd: f64,
    pub nu_lo: f64,
    pub nu_hi: f64,
    pub seed: u64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            n_societies: 100,
            gini_mean: 0.4,
            gini_sd: 0.05,
            nu_lo: 0.1,
            nu_hi: 0.2,
            seed: DEFAULT_SEED,
        }
    }
}

impl MonteCarloConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_societies < 2 {
            return Err(Error::Config(format!(
                "need at least 2 societies, got {}",
                self.n_societies
            )));
        }
        if !(self.gini_sd > 0.0) || !self.gini_mean.is_finite() {
            return Err(Error::Config(format!(
                "Gini sampling needs a finite mean and positive sd, got N({}, {})",
                self.gini_mean, self.gini_sd
            )));
        }
        if !(0.0 <= self.nu_lo && self.nu_lo < self.nu_hi && self.nu_hi < 1.0) {
            return Err(Error::Config(format!(
                "need 0 <= nu_lo < nu_hi < 1, got [{}, {}]",
                self.nu_lo, self.nu_hi
            )));
        }
        Ok(())
    }
}

/// Draws `G ~ Normal(mean, sd)` and `nu ~ Uniform[lo, hi]`, rejecting pairs
/// outside `nu < G < 1`.
pub fn sample_societies(config: &MonteCarloConfig) -> Result<Vec<ParetoSociety>> {
    config.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let gini_dist = Normal::new(config.gini_mean, config.gini_sd)
        .map_err(|e| Error::Config(e.to_string()))?;
    let nu_dist =
        Uniform::new_inclusive(config.nu_lo, config.nu_hi).map_err(|e| Error::Config(e.to_string()))?;

    let mut out = Vec::with_capacity(config.n_societies);
    let mut attempts: u64 = 0;
    while out.len() < config.n_societies {
        attempts += 1;
        let g = gini_dist.sample(&mut rng);
        let nu = nu_dist.sample(&mut rng);
        if nu > 0.0 && nu < g && g < 1.0 {
            out.push(ParetoSociety::from_gini(g, nu)?);
        }
        if attempts >= 1_000 && (out.len() as f64) < 0.01 * attempts as f64 {
            return Err(Error::Config(format!(
                "rejection rate above 99% after {attempts} draws: N({}, {}) x U[{}, {}] rarely satisfies nu < G < 1",
                config.gini_mean, config.gini_sd, config.nu_lo, config.nu_hi
            )));
        }
    }
    Ok(out)
}

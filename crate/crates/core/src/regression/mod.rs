//! Least-squares estimation: simple and polynomial OLS, the two-way
//! fixed-effects panel estimator, and the standard errors they report.

mod linalg;
mod panel;
mod poly;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

pub use linalg::{least_squares, LeastSquares};
pub use panel::{panel_fe, LagSource, PanelSpec, PanelTable};
pub use poly::poly_ols;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CovType {
    Classical,
    Cluster { by: String },
}

/// Output of one estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    /// Names aligned with `coefficients`; the intercept, when present, is first.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Row-major `k x k` covariance of the coefficients.
    pub covariance: Vec<f64>,
    pub r_squared: f64,
    pub n_obs: usize,
    pub residuals: Vec<f64>,
    pub cov_type: CovType,
    /// Residual degrees of freedom, absorbed effects included.
    pub df_resid: usize,
    pub n_clusters: Option<usize>,
    /// Rows removed by listwise deletion.
    pub dropped_rows: usize,
}

impl RegressionFit {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coef(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.coefficients[i])
    }

    pub fn se(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.std_errors[i])
    }

    /// Degrees of freedom used for inference: clusters minus one for
    /// clustered fits, residual df otherwise.
    pub fn inference_df(&self) -> usize {
        match (&self.cov_type, self.n_clusters) {
            (CovType::Cluster { .. }, Some(g)) => g.saturating_sub(1),
            _ => self.df_resid,
        }
    }

    /// Two-sided critical value at confidence `level`.
    pub fn critical_value(&self, level: f64) -> f64 {
        critical_value(level, self.inference_df())
    }

    /// Confidence interval for coefficient `i` at confidence `level`.
    pub fn conf_int(&self, i: usize, level: f64) -> (f64, f64) {
        let c = self.critical_value(level);
        let (b, s) = (self.coefficients[i], self.std_errors[i]);
        (b - c * s, b + c * s)
    }
}

/// Student-t critical value; falls back to the normal when df is 0.
pub fn critical_value(level: f64, df: usize) -> f64 {
    let upper = 1.0 - (1.0 - level) / 2.0;
    if df == 0 {
        return Normal::standard().inverse_cdf(upper);
    }
    StudentsT::new(0.0, 1.0, df as f64)
        .map(|t| t.inverse_cdf(upper))
        .unwrap_or_else(|_| Normal::standard().inverse_cdf(upper))
}

/// Summary of a simple regression `y = a + b x`, without residual storage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub alpha: f64,
    pub beta: f64,
    pub alpha_se: f64,
    pub beta_se: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Centered moments of a pair of series.
struct Moments {
    mean_x: f64,
    mean_y: f64,
    sxx: f64,
    sxy: f64,
    syy: f64,
}

fn moments(y: &[f64], x: &[f64]) -> Moments {
    let n = y.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&yi, &xi) in y.iter().zip(x) {
        let dx = xi - mean_x;
        let dy = yi - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    Moments {
        mean_x,
        mean_y,
        sxx,
        sxy,
        syy,
    }
}

fn check_pair(y: &[f64], x: &[f64]) -> Result<()> {
    if y.len() != x.len() {
        return Err(Error::domain(format!(
            "length mismatch: y has {}, x has {}",
            y.len(),
            x.len()
        )));
    }
    if y.len() < 3 {
        return Err(Error::domain(format!("need at least 3 observations, got {}", y.len())));
    }
    Ok(())
}

/// Simple regression of `y` on `x` with classical standard errors.
///
/// A constant `y` yields slope 0 and `R^2 = 0`.
pub fn fit_line(y: &[f64], x: &[f64]) -> Result<LineFit> {
    check_pair(y, x)?;
    let m = moments(y, x);
    if !(m.sxx > 0.0) {
        return Err(Error::DegenerateDesign("regressor has zero variance".into()));
    }
    let n = y.len();
    let beta = if m.syy == 0.0 { 0.0 } else { m.sxy / m.sxx };
    let alpha = m.mean_y - beta * m.mean_x;
    let ssr: f64 = y
        .iter()
        .zip(x)
        .map(|(&yi, &xi)| {
            let e = yi - alpha - beta * xi;
            e * e
        })
        .sum();
    let r_squared = if m.syy == 0.0 {
        0.0
    } else {
        (1.0 - ssr / m.syy).clamp(0.0, 1.0)
    };
    let sigma2 = ssr / (n - 2) as f64;
    let nf = n as f64;
    Ok(LineFit {
        alpha,
        beta,
        alpha_se: (sigma2 * (1.0 / nf + m.mean_x * m.mean_x / m.sxx)).sqrt(),
        beta_se: (sigma2 / m.sxx).sqrt(),
        r_squared,
        n,
    })
}

/// [`fit_line`] returning a full [`RegressionFit`] with residuals.
pub fn ols(y: &[f64], x: &[f64]) -> Result<RegressionFit> {
    let f = fit_line(y, x)?;
    let n = y.len();
    let residuals: Vec<f64> = y
        .iter()
        .zip(x)
        .map(|(&yi, &xi)| yi - f.alpha - f.beta * xi)
        .collect();
    let m = moments(y, x);
    let sigma2 = residuals.iter().map(|e| e * e).sum::<f64>() / (n - 2) as f64;
    let cov_ab = -sigma2 * m.mean_x / m.sxx;
    Ok(RegressionFit {
        names: vec!["const".into(), "x".into()],
        coefficients: vec![f.alpha, f.beta],
        std_errors: vec![f.alpha_se, f.beta_se],
        covariance: vec![f.alpha_se.powi(2), cov_ab, cov_ab, f.beta_se.powi(2)],
        r_squared: f.r_squared,
        n_obs: n,
        residuals,
        cov_type: CovType::Classical,
        df_resid: n - 2,
        n_clusters: None,
        dropped_rows: 0,
    })
}

/// `beta^2 var_x / var_y`, the simple-regression identity for `R^2`.
pub fn r_squared_identity_check(fit: &RegressionFit, var_x: f64, var_y: f64) -> Result<f64> {
    let slope_idx = match fit.coefficients.len() {
        2 => 1,
        1 => 0,
        k => {
            return Err(Error::domain(format!(
                "R^2 identity needs a univariate fit, got {k} coefficients"
            )))
        }
    };
    if var_y == 0.0 {
        return Ok(0.0);
    }
    let b = fit.coefficients[slope_idx];
    Ok(b * b * var_x / var_y)
}

/// Rescales to mean 0 and sample standard deviation 1.
pub fn standardize(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::domain("standardize needs at least 2 values"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) {
        return Err(Error::domain("cannot standardize a constant series"));
    }
    let sd = var.sqrt();
    Ok(values.iter().map(|v| (v - mean) / sd).collect())
}

/// Population variance (divisor n).
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Pearson correlation; 0 when either series is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let m = moments(a, b);
    if m.sxx == 0.0 || m.syy == 0.0 {
        return 0.0;
    }
    m.sxy / (m.sxx * m.syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_line() {
        let f = ols(&[0.0, 2.0, 4.0], &[0.0, 1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(f.coefficients[1], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.coefficients[0], 0.0, epsilon = 1e-14);
        assert_eq!(f.r_squared, 1.0);
        assert_abs_diff_eq!(r_squared_identity_check(&f, variance(&[0.0, 1.0, 2.0]), variance(&[0.0, 2.0, 4.0])).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn constant_y_convention() {
        let f = ols(&[1.0; 5], &[0.0, 1.0, 2.0, 3.0, 5.0]).unwrap();
        assert_eq!(f.coefficients[1], 0.0);
        assert_eq!(f.r_squared, 0.0);
        assert_eq!(r_squared_identity_check(&f, 2.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn input_errors() {
        assert!(ols(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(ols(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
        assert!(matches!(
            ols(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]),
            Err(Error::DegenerateDesign(_))
        ));
    }

    #[test]
    fn residuals_sum_to_zero_and_identity_holds_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.3 - 1.7 * v + rng.random::<f64>()).collect();
        let f = ols(&y, &x).unwrap();
        assert!(f.residuals.iter().sum::<f64>().abs() < 1e-8);
        let id = r_squared_identity_check(&f, variance(&x), variance(&y)).unwrap();
        assert_abs_diff_eq!(id, f.r_squared, epsilon = 1e-10);
    }

    #[test]
    fn standardize_examples() {
        let z = standardize(&[1.0, 2.0, 3.0]).unwrap();
        for (a, b) in z.iter().zip([-1.0, 0.0, 1.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        let again = standardize(&z).unwrap();
        for (a, b) in again.iter().zip(&z) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert!(standardize(&[2.0, 2.0, 2.0]).is_err());
    }

    #[test]
    fn critical_values() {
        assert_abs_diff_eq!(critical_value(0.90, 0), 1.6448536, epsilon = 1e-6);
        assert_abs_diff_eq!(critical_value(0.95, 10), 2.2281389, epsilon = 1e-6);
    }

    proptest! {
        #[test]
        fn slope_is_linear_in_y(
            x in prop::collection::vec(-10.0f64..10.0, 8),
            y1 in prop::collection::vec(-10.0f64..10.0, 8),
            y2 in prop::collection::vec(-10.0f64..10.0, 8),
        ) {
            prop_assume!(variance(&x) > 1e-3);
            let sum: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a + b).collect();
            let b = |y: &[f64]| fit_line(y, &x).unwrap().beta;
            prop_assert!((b(&sum) - b(&y1) - b(&y2)).abs() < 1e-10);
        }

        #[test]
        fn standardized_moments(v in prop::collection::vec(-1e3f64..1e3, 2..60)) {
            prop_assume!(variance(&v) > 1e-6);
            let z = standardize(&v).unwrap();
            let n = z.len() as f64;
            let mean = z.iter().sum::<f64>() / n;
            let sd = (z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            prop_assert!(mean.abs() < 1e-12);
            prop_assert!((sd - 1.0).abs() < 1e-12);
        }
    }
}

use nalgebra::{DMatrix, DVector};

use super::linalg::least_squares;
use super::{CovType, RegressionFit};
use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 8;

/// Polynomial least squares of `y` on `x, x^2, ..., x^degree`.
///
/// The fit runs on the standardized regressor `z = (x - mean) / sd` and the
/// coefficients (and their covariance) are mapped back to powers of `x`.
pub fn poly_ols(y: &[f64], x: &[f64], degree: usize) -> Result<RegressionFit> {
    if !(1..=MAX_DEGREE).contains(&degree) {
        return Err(Error::domain(format!("degree must be in 1..={MAX_DEGREE}, got {degree}")));
    }
    if y.len() != x.len() {
        return Err(Error::domain(format!(
            "length mismatch: y has {}, x has {}",
            y.len(),
            x.len()
        )));
    }
    let n = y.len();
    let k = degree + 1;
    if n <= k {
        return Err(Error::domain(format!(
            "degree {degree} needs more than {k} observations, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf).sqrt();
    if !(sd > 0.0) {
        return Err(Error::DegenerateDesign("regressor has zero variance".into()));
    }

    let names: Vec<String> = (0..k)
        .map(|j| match j {
            0 => "const".to_string(),
            1 => "x".to_string(),
            _ => format!("x^{j}"),
        })
        .collect();
    let design = DMatrix::from_fn(n, k, |i, j| ((x[i] - mean) / sd).powi(j as i32));
    let yv = DVector::from_column_slice(y);
    let ls = least_squares(&design, &yv, &names)?;

    let ybar = y.iter().sum::<f64>() / nf;
    let sst: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let ssr: f64 = ls.residuals.iter().map(|e| e * e).sum();
    let r_squared = if sst == 0.0 {
        0.0
    } else {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    };
    let sigma2 = ssr / (n - k) as f64;

    // b_i = sum_{j >= i} c_j sd^-j C(j, i) (-mean)^(j - i)
    let t = DMatrix::from_fn(k, k, |i, j| {
        if j < i {
            0.0
        } else {
            sd.powi(-(j as i32)) * binomial(j, i) * (-mean).powi((j - i) as i32)
        }
    });
    let coef = &t * &ls.coef;
    let cov = &t * (ls.xtx_inv * sigma2) * t.transpose();
    let coefficients = if sst == 0.0 {
        let mut c = vec![0.0; k];
        c[0] = ybar;
        c
    } else {
        coef.iter().copied().collect()
    };

    Ok(RegressionFit {
        names,
        coefficients,
        std_errors: (0..k).map(|i| cov[(i, i)].max(0.0).sqrt()).collect(),
        covariance: cov.transpose().iter().copied().collect(),
        r_squared,
        n_obs: n,
        residuals: ls.residuals.iter().copied().collect(),
        cov_type: CovType::Classical,
        df_resid: n - k,
        n_clusters: None,
        dropped_rows: 0,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::ols;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn recovers_parabola() {
        let x = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let f = poly_ols(&y, &x, 2).unwrap();
        assert_abs_diff_eq!(f.r_squared, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.coefficients[2], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.coefficients[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.coefficients[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn degree_one_matches_ols() {
        let x = [0.3, 1.7, 2.2, 3.9, 5.1, 6.0];
        let y = [1.0, 2.9, 3.1, 6.2, 7.7, 9.5];
        let a = poly_ols(&y, &x, 1).unwrap();
        let b = ols(&y, &x).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(a.coefficients[i], b.coefficients[i], epsilon = 1e-10);
            assert_abs_diff_eq!(a.std_errors[i], b.std_errors[i], epsilon = 1e-10);
        }
        assert_abs_diff_eq!(a.r_squared, b.r_squared, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_degree_and_short_samples() {
        let x = [0.0, 1.0, 2.0];
        assert!(poly_ols(&x, &x, 0).is_err());
        assert!(poly_ols(&x, &x, 9).is_err());
        assert!(poly_ols(&x, &x, 2).is_err());
    }

    #[test]
    fn repeated_regressor_values_are_degenerate() {
        let x = [0.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        let y = [0.1, 0.2, 0.9, 1.1, 0.0, 1.0];
        assert!(matches!(poly_ols(&y, &x, 3), Err(Error::DegenerateDesign(_))));
    }

    proptest! {
        #[test]
        fn r_squared_weakly_increases_with_degree(
            x in prop::collection::vec(-3.0f64..3.0, 30),
            y in prop::collection::vec(-3.0f64..3.0, 30),
        ) {
            let mut prev = 0.0;
            for d in 1..=5 {
                let Ok(f) = poly_ols(&y, &x, d) else { return Ok(()) };
                prop_assert!(f.r_squared >= prev - 1e-10);
                prev = f.r_squared;
            }
        }
    }
}

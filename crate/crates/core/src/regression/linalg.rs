use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative size below which a pivot of `R` counts as rank loss.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug)]
pub struct LeastSquares {
    pub coef: DVector<f64>,
    pub residuals: DVector<f64>,
    /// `(X'X)^-1`, computed as `R^-1 R^-T`.
    pub xtx_inv: DMatrix<f64>,
}

/// Least squares through a Householder QR factorization of `x`.
///
/// `names` labels the columns of `x` so that rank loss can be reported
/// against the offending variable.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<LeastSquares> {
    let (n, k) = x.shape();
    if n != y.len() {
        return Err(Error::domain(format!("design has {n} rows but y has {}", y.len())));
    }
    if n < k {
        return Err(Error::DegenerateDesign(format!(
            "{n} observations for {k} coefficients"
        )));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..k).map(|i| r[(i, i)].abs()).fold(0.0_f64, f64::max);
    for i in 0..k {
        if !(r[(i, i)].abs() > RANK_TOL * scale) {
            let name = names.get(i).map(String::as_str).unwrap_or("?");
            return Err(Error::DegenerateDesign(format!(
                "column `{name}` is collinear with the preceding columns"
            )));
        }
    }
    let qty = qr.q().transpose() * y;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::DegenerateDesign("singular triangular factor".into()))?;
    let residuals = y - x * &coef;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::DegenerateDesign("singular triangular factor".into()))?;
    let xtx_inv = &r_inv * r_inv.transpose();
    Ok(LeastSquares {
        coef,
        residuals,
        xtx_inv,
    })
}

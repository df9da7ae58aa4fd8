//! Least-squares solvers shared by the VAR, ADF and Granger fits.

use nalgebra::DMatrix;

use super::{Result, TimeSeriesError};

// column j is rank deficient when |R_jj| falls below this fraction of its norm
const RANK_TOL: f64 = 1e-10;

pub(crate) struct QrFit {
    /// `k × m` coefficients, one column per response.
    pub coef: DMatrix<f64>,
    pub residuals: DMatrix<f64>,
    /// Upper-triangular factor of the design.
    pub r: DMatrix<f64>,
}

/// Solves the normal equations through a Householder QR of the design,
/// reporting the first column that is collinear with its predecessors.
pub(crate) fn qr_fit(x: &DMatrix<f64>, y: &DMatrix<f64>, column_name: impl Fn(usize) -> String) -> Result<QrFit> {
    let (n, k) = x.shape();
    if n < k {
        return Err(TimeSeriesError::Insufficient { needed: k, have: n });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..k {
        let norm = x.column(j).norm();
        if norm == 0.0 || r[(j, j)].abs() <= RANK_TOL * norm {
            return Err(TimeSeriesError::RankDeficient { column: column_name(j) });
        }
    }
    let qty = qr.q().tr_mul(y);
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| TimeSeriesError::Numerical("triangular solve failed".into()))?;
    let residuals = y - x * &coef;
    Ok(QrFit { coef, residuals, r })
}

/// Diagonal of `(X'X)^{-1}` from the R factor.
pub(crate) fn xtx_inverse_diagonal(r: &DMatrix<f64>) -> Result<Vec<f64>> {
    let k = r.nrows();
    let r_inv = r
        .clone()
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| TimeSeriesError::Numerical("singular R factor".into()))?;
    Ok((0..k).map(|i| r_inv.row(i).norm_squared()).collect())
}

/// Residual sum of squares of a minimum-norm least-squares fit; tolerates
/// collinear columns.
pub(crate) fn rss_lstsq(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    let svd = x.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let eps = max_sv * 1e-12 * x.nrows().max(x.ncols()) as f64;
    let coef = svd
        .solve(y, eps)
        .map_err(|e| TimeSeriesError::Numerical(e.to_string()))?;
    Ok((y - x * coef).norm_squared())
}

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    /// Intercept first, then one coefficient per feature column.
    pub beta_hat: DVector<f64>,
    pub r2: f64,
    pub r2_adj: f64,
}

pub fn adjusted_r2(r2: f64, n: usize, p: usize) -> f64 {
    1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - p as f64 - 1.0)
}

/// `[1, X]`
pub(crate) fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = x.shape();
    DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] })
}

pub(crate) fn check_finite(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::InvalidInput(format!(
            "feature matrix has {} rows but response has {} entries",
            x.nrows(),
            y.len()
        )));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite values in regression input".into()));
    }
    Ok(())
}

/// Least squares with an intercept, solved through a Householder QR of the design.
pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    check_finite(x, y)?;
    let (n, p) = x.shape();
    if n <= p + 1 {
        return Err(Error::TooFewObservations { n, p });
    }
    let design = with_intercept(x);
    let k = p + 1;
    let qr = design.clone().qr();
    let r = qr.r();
    let max_diag = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if max_diag == 0.0 || (0..k).any(|i| r[(i, i)].abs() <= 1e-10 * max_diag) {
        return Err(Error::RankDeficient);
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, k).into_owned();
    let beta_hat = r.solve_upper_triangular(&rhs).ok_or(Error::RankDeficient)?;

    let mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if sst == 0.0 {
        return Err(Error::InvalidInput("response has zero variance; R² undefined".into()));
    }
    let resid = y - &design * &beta_hat;
    let sse = resid.norm_squared();
    let r2 = (1.0 - sse / sst).clamp(0.0, 1.0);
    Ok(OlsFit {
        beta_hat,
        r2,
        r2_adj: adjusted_r2(r2, n, p),
    })
}

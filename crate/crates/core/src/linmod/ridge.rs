//! Cross-validated ridge regression.
//!
//! Loss: `(1/n)·‖y − b₀ − X̃β‖² + λ‖β‖²` on columns standardised with the
//! training mean and population SD (1/n). The intercept is unpenalised. The
//! closed form on standardised data is `β = (X̃ᵀX̃ + nλI)⁻¹ X̃ᵀ(y − ȳ)`,
//! evaluated through one thin SVD of `X̃` so a whole λ path costs O(p²) per λ.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use super::ols::check_finite;
use crate::error::{Error, Result};

pub const DEFAULT_FOLDS: usize = 10;
pub const GRID_LEN: usize = 100;
pub const GRID_RATIO: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub lambda: f64,
    /// Slopes on the original feature scale.
    pub coefficients: DVector<f64>,
    pub intercept: f64,
    pub lambda_grid: Vec<f64>,
    /// Mean held-out squared error for each grid value.
    pub cv_mse_curve: Vec<f64>,
}

/// Column standardisation with population (1/n) standard deviations.
#[derive(Debug, Clone)]
pub struct Standardizer {
    pub means: DVector<f64>,
    /// Zero for constant columns; such columns are mapped to 0.
    pub scales: DVector<f64>,
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let (n, p) = x.shape();
        let means = DVector::from_fn(p, |k, _| x.column(k).mean());
        let scales = DVector::from_fn(p, |k, _| {
            let m = means[k];
            let sd = (x.column(k).iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt();
            if sd <= f64::EPSILON * x.column(k).amax() {
                0.0
            } else {
                sd
            }
        });
        Self { means, scales }
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, k| {
            if self.scales[k] == 0.0 {
                0.0
            } else {
                (x[(i, k)] - self.means[k]) / self.scales[k]
            }
        })
    }
}

/// Ridge solutions for one training set at any λ.
#[derive(Debug, Clone)]
pub struct RidgePath {
    standardizer: Standardizer,
    y_mean: f64,
    n: usize,
    singular_values: DVector<f64>,
    v: DMatrix<f64>,
    uty: DVector<f64>,
}

impl RidgePath {
    pub fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        check_finite(x, y)?;
        let (n, p) = x.shape();
        if n < 2 || p == 0 {
            return Err(Error::InvalidInput(format!("ridge needs n >= 2 and p >= 1, got n={n}, p={p}")));
        }
        let standardizer = Standardizer::fit(x);
        let xs = standardizer.transform(x);
        let y_mean = y.mean();
        let yc = y.add_scalar(-y_mean);
        let svd = xs.svd(true, true);
        let u = svd.u.expect("left singular vectors requested");
        let v = svd.v_t.expect("right singular vectors requested").transpose();
        let uty = u.tr_mul(&yc);
        Ok(Self {
            standardizer,
            y_mean,
            n,
            singular_values: svd.singular_values,
            v,
            uty,
        })
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn standardized_coefficients(&self, lambda: f64) -> DVector<f64> {
        let s_max = self.singular_values.max();
        let nl = self.n as f64 * lambda;
        let weights = DVector::from_fn(self.singular_values.len(), |i, _| {
            let s = self.singular_values[i];
            if s <= 1e-12 * s_max {
                // Null direction of the design: pseudo-inverse / shrunk away.
                0.0
            } else {
                s / (s * s + nl) * self.uty[i]
            }
        });
        &self.v * weights
    }

    /// `(slopes, intercept)` on the original feature scale.
    pub fn coefficients(&self, lambda: f64) -> (DVector<f64>, f64) {
        let std_beta = self.standardized_coefficients(lambda);
        let st = &self.standardizer;
        let beta = DVector::from_fn(std_beta.len(), |k, _| {
            if st.scales[k] == 0.0 {
                0.0
            } else {
                std_beta[k] / st.scales[k]
            }
        });
        let intercept = self.y_mean - beta.dot(&st.means);
        (beta, intercept)
    }
}

/// `λ_max = max_k |x̃_kᵀ y| / n` on the fully standardised data.
pub fn lambda_max(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let xs = Standardizer::fit(x).transform(x);
    let yc = y.add_scalar(-y.mean());
    let n = x.nrows() as f64;
    (xs.tr_mul(&yc) / n).amax()
}

/// 100 log-spaced values from `λ_max` down to `1e-4·λ_max`.
pub fn default_lambda_grid(x: &DMatrix<f64>, y: &DVector<f64>) -> Vec<f64> {
    let lmax = lambda_max(x, y);
    if !(lmax > 0.0) {
        return vec![0.0];
    }
    let step = GRID_RATIO.log10() / (GRID_LEN - 1) as f64;
    (0..GRID_LEN).map(|j| lmax * 10f64.powf(step * j as f64)).collect()
}

/// Shuffled indices cut into `folds` contiguous blocks of near-equal size.
pub fn fold_assignment<R: Rng + ?Sized>(n: usize, folds: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    out
}

fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |i, k| x[(rows[i], k)])
}

fn select_entries(y: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
    DVector::from_fn(rows.len(), |i, _| y[rows[i]])
}

pub fn ridge_cv<R: Rng + ?Sized>(x: &DMatrix<f64>, y: &DVector<f64>, folds: usize, rng: &mut R) -> Result<RidgeFit> {
    let grid = default_lambda_grid(x, y);
    ridge_cv_with_grid(x, y, folds, &grid, rng)
}

pub fn ridge_cv_with_grid<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    folds: usize,
    grid: &[f64],
    rng: &mut R,
) -> Result<RidgeFit> {
    check_finite(x, y)?;
    let (n, p) = x.shape();
    if p == 0 {
        return Err(Error::InvalidInput("ridge needs at least one feature".into()));
    }
    if folds < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 folds, got {folds}")));
    }
    if n < 2 * folds {
        return Err(Error::TooFewObservations { n, p });
    }
    if grid.is_empty() || grid.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(Error::InvalidInput("λ grid must be non-empty, finite and non-negative".into()));
    }

    let assignment = fold_assignment(n, folds, rng);
    let mut sse = vec![0.0; grid.len()];
    for held_out in &assignment {
        let mut is_held = vec![false; n];
        held_out.iter().for_each(|&i| is_held[i] = true);
        let train: Vec<usize> = (0..n).filter(|&i| !is_held[i]).collect();
        let path = RidgePath::new(&select_rows(x, &train), &select_entries(y, &train))?;
        let x_val = select_rows(x, held_out);
        let y_val = select_entries(y, held_out);
        for (li, &lambda) in grid.iter().enumerate() {
            let (beta, b0) = path.coefficients(lambda);
            let pred = (&x_val * beta).add_scalar(b0);
            sse[li] += (&y_val - pred).norm_squared();
        }
    }
    let cv_mse_curve: Vec<f64> = sse.into_iter().map(|s| s / n as f64).collect();
    let best = cv_mse_curve
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &m)| if m < acc.1 { (i, m) } else { acc })
        .0;
    let lambda = grid[best];
    let (coefficients, intercept) = RidgePath::new(x, y)?.coefficients(lambda);
    Ok(RidgeFit {
        lambda,
        coefficients,
        intercept,
        lambda_grid: grid.to_vec(),
        cv_mse_curve,
    })
}

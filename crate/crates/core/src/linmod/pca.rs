use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Principal components of the column-standardised feature matrix.
#[derive(Debug, Clone)]
pub struct PcaBasis {
    pub column_means: DVector<f64>,
    /// Sample standard deviations (n − 1 denominator).
    pub column_scales: DVector<f64>,
    /// p × k, orthonormal columns.
    pub loadings: DMatrix<f64>,
    /// n × k component scores.
    pub scores: DMatrix<f64>,
    /// Variance of each score column.
    pub variances: DVector<f64>,
}

impl PcaBasis {
    pub fn n_components(&self) -> usize {
        self.loadings.ncols()
    }
}

pub fn pca_scores(x: &DMatrix<f64>) -> Result<PcaBasis> {
    let (n, p) = x.shape();
    if n < 2 {
        return Err(Error::InvalidInput(format!("PCA needs at least 2 rows, got {n}")));
    }
    if p == 0 {
        return Err(Error::InvalidInput("PCA needs at least one column".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite values in PCA input".into()));
    }
    let means = DVector::from_fn(p, |k, _| x.column(k).mean());
    let scales = DVector::from_fn(p, |k, _| {
        let m = means[k];
        (x.column(k).iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
    });
    for k in 0..p {
        let col_scale = x.column(k).amax();
        if scales[k] == 0.0 || scales[k] <= f64::EPSILON * col_scale {
            return Err(Error::ZeroVarianceColumn { column: k });
        }
    }
    let z = DMatrix::from_fn(n, p, |i, k| (x[(i, k)] - means[k]) / scales[k]);

    let k = (n - 1).min(p);
    let svd = z.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut loadings = v_t.rows(0, k).transpose();
    // Sign convention: the largest-magnitude entry of each loading is positive.
    for mut col in loadings.column_iter_mut() {
        let (imax, _) = col.iter().enumerate().fold((0, 0.0f64), |acc, (i, v)| {
            if v.abs() > acc.1 {
                (i, v.abs())
            } else {
                acc
            }
        });
        if col[imax] < 0.0 {
            col.neg_mut();
        }
    }
    let scores = &z * &loadings;
    let variances = DVector::from_fn(k, |c, _| svd.singular_values[c].powi(2) / (n as f64 - 1.0));
    Ok(PcaBasis {
        column_means: means,
        column_scales: scales,
        loadings,
        scores,
        variances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))
    }

    fn column_var(m: &DMatrix<f64>, c: usize) -> f64 {
        let mean = m.column(c).mean();
        m.column(c).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m.nrows() as f64 - 1.0)
    }

    #[test]
    fn orthonormal_loadings_and_uncorrelated_scores() {
        let x = random(40, 6, 1);
        let pca = pca_scores(&x).unwrap();
        assert_eq!(pca.n_components(), 6);
        let gram = pca.loadings.transpose() * &pca.loadings;
        assert!((gram - DMatrix::identity(6, 6)).amax() < 1e-10);
        for a in 0..6 {
            for b in 0..a {
                let ca: Vec<f64> = pca.scores.column(a).iter().copied().collect();
                let cb: Vec<f64> = pca.scores.column(b).iter().copied().collect();
                assert!(crate::rdm::pearson(&ca, &cb).unwrap().abs() < 1e-8);
            }
        }
    }

    #[test]
    fn total_variance_preserved() {
        let x = random(25, 5, 2);
        let pca = pca_scores(&x).unwrap();
        let total: f64 = (0..pca.n_components()).map(|c| column_var(&pca.scores, c)).sum();
        assert!((total - 5.0).abs() < 1e-10);
    }

    #[test]
    fn wide_matrix_keeps_n_minus_one_components() {
        let x = random(5, 8, 3);
        let pca = pca_scores(&x).unwrap();
        assert_eq!(pca.n_components(), 4);
        assert_eq!(pca.scores.shape(), (5, 4));
        let total: f64 = (0..4).map(|c| column_var(&pca.scores, c)).sum();
        assert!((total - 8.0).abs() < 1e-10);
    }

    #[test]
    fn duplicated_column_collapses_last_component() {
        let mut x = random(30, 3, 4);
        for i in 0..30 {
            x[(i, 2)] = x[(i, 1)];
        }
        let pca = pca_scores(&x).unwrap();
        assert!(pca.variances[2] < 1e-10 * pca.variances[0]);
    }

    #[test]
    fn reconstruction_at_full_rank() {
        let x = random(20, 4, 5);
        let pca = pca_scores(&x).unwrap();
        let z = DMatrix::from_fn(20, 4, |i, k| (x[(i, k)] - pca.column_means[k]) / pca.column_scales[k]);
        let back = &pca.scores * pca.loadings.transpose();
        assert!((back - z).amax() < 1e-8);
    }

    #[test]
    fn zero_variance_column_rejected() {
        let mut x = random(10, 3, 6);
        for i in 0..10 {
            x[(i, 1)] = 4.0;
        }
        assert!(matches!(pca_scores(&x), Err(Error::ZeroVarianceColumn { column: 1 })));
        assert!(pca_scores(&random(1, 3, 7)).is_err());
    }
}

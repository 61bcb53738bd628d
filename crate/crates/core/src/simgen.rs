//! Synthetic data generation.
//!
//! Features are multivariate normal with a block covariance: the first half
//! of the columns are "relevant" (non-zero coefficients), the second half
//! "irrelevant". Responses follow a linear model with Gaussian noise. The
//! voxel variant spreads each response over a noisy radial activation map.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::harness::stream::{derive_stream, labels};

const PD_ATTEMPTS: usize = 100;
const MIN_EIGENVALUE: f64 = 1e-10;

/// Population correlation structure of the feature matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceSpec {
    pub p: usize,
    pub rho_relevant: f64,
    pub rho_irrelevant: f64,
    /// Closed interval `[lo, hi]` for relevant/irrelevant cross correlations.
    pub cross_range: (f64, f64),
}

impl CovarianceSpec {
    pub fn new(p: usize, rho_relevant: f64, rho_irrelevant: f64) -> Self {
        Self {
            p,
            rho_relevant,
            rho_irrelevant,
            cross_range: (0.0, 0.1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || !self.p.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "feature count must be a positive even integer, got {}",
                self.p
            )));
        }
        for (name, rho) in [
            ("rho_relevant", self.rho_relevant),
            ("rho_irrelevant", self.rho_irrelevant),
        ] {
            if !(0.0..1.0).contains(&rho) {
                return Err(Error::InvalidInput(format!("{name} must lie in [0, 1), got {rho}")));
            }
        }
        let (lo, hi) = self.cross_range;
        if !(0.0..1.0).contains(&lo) || !(0.0..1.0).contains(&hi) || lo > hi {
            return Err(Error::InvalidInput(format!(
                "cross_range must be an ordered subset of [0, 1), got [{lo}, {hi}]"
            )));
        }
        Ok(())
    }

    pub fn n_relevant(&self) -> usize {
        self.p / 2
    }
}

/// Linear-model coefficients and noise level for one response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectSpec {
    pub intercept: f64,
    pub beta_relevant: f64,
    pub beta_irrelevant: f64,
    pub noise_variance: f64,
}

impl EffectSpec {
    pub const LARGER_BETA: f64 = 0.5;
    pub const SMALLER_BETA: f64 = 0.4;

    pub fn new(beta_relevant: f64, noise_variance: f64) -> Self {
        Self {
            intercept: 1.0,
            beta_relevant,
            beta_irrelevant: 0.0,
            noise_variance,
        }
    }

    pub fn larger(noise_variance: f64) -> Self {
        Self::new(Self::LARGER_BETA, noise_variance)
    }

    pub fn smaller(noise_variance: f64) -> Self {
        Self::new(Self::SMALLER_BETA, noise_variance)
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta_irrelevant != 0.0 {
            return Err(Error::InvalidInput("irrelevant coefficients must be zero".into()));
        }
        if !(self.noise_variance >= 0.0) || !self.noise_variance.is_finite() {
            return Err(Error::InvalidInput(format!(
                "noise variance must be finite and non-negative, got {}",
                self.noise_variance
            )));
        }
        if !self.intercept.is_finite() || !self.beta_relevant.is_finite() {
            return Err(Error::InvalidInput("coefficients must be finite".into()));
        }
        Ok(())
    }

    /// Coefficient vector over `p` features (relevant block first).
    pub fn coefficients(&self, p: usize) -> DVector<f64> {
        DVector::from_fn(p, |k, _| {
            if k < p / 2 {
                self.beta_relevant
            } else {
                self.beta_irrelevant
            }
        })
    }
}

/// One simulated condition: sample size, noise level and feature covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub id: u64,
    pub n: usize,
    pub noise_var: f64,
    pub covariance: CovarianceSpec,
}

/// One replication's data for a single response model.
#[derive(Debug, Clone)]
pub struct SimDataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub condition_id: u64,
    pub replication: u64,
}

/// The paired larger/smaller-effect data for one replication. Both responses
/// share the feature matrix and use independent noise draws.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedReplication {
    pub x: DMatrix<f64>,
    pub y_large: DVector<f64>,
    pub y_small: DVector<f64>,
    pub condition_id: u64,
    pub replication: u64,
}

impl PairedReplication {
    pub fn large(&self) -> SimDataset {
        SimDataset {
            x: self.x.clone(),
            y: self.y_large.clone(),
            condition_id: self.condition_id,
            replication: self.replication,
        }
    }

    pub fn small(&self) -> SimDataset {
        SimDataset {
            x: self.x.clone(),
            y: self.y_small.clone(),
            condition_id: self.condition_id,
            replication: self.replication,
        }
    }
}

/// Radial activation map parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialConfig {
    pub grid: usize,
    pub noise_sd: f64,
}

impl Default for RadialConfig {
    fn default() -> Self {
        Self {
            grid: 11,
            noise_sd: 0.2,
        }
    }
}

impl RadialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid < 3 || self.grid.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "grid side must be odd and >= 3, got {}",
                self.grid
            )));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return Err(Error::InvalidInput(format!(
                "map noise SD must be finite and non-negative, got {}",
                self.noise_sd
            )));
        }
        Ok(())
    }

    pub fn n_voxels(&self) -> usize {
        self.grid * self.grid
    }
}

/// Paired voxel data: `v_large` row i is the map for `y_large[i]`, etc.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelDataset {
    pub x: DMatrix<f64>,
    pub y_large: DVector<f64>,
    pub y_small: DVector<f64>,
    pub v_large: DMatrix<f64>,
    pub v_small: DMatrix<f64>,
}

pub fn build_covariance<R: Rng + ?Sized>(spec: &CovarianceSpec, rng: &mut R) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let p = spec.p;
    let half = spec.n_relevant();
    let mut sigma = DMatrix::<f64>::identity(p, p);
    for i in 0..p {
        for j in 0..p {
            if i == j {
                continue;
            }
            if i < half && j < half {
                sigma[(i, j)] = spec.rho_relevant;
            } else if i >= half && j >= half {
                sigma[(i, j)] = spec.rho_irrelevant;
            }
        }
    }

    let (lo, hi) = spec.cross_range;
    let cross = Uniform::new_inclusive(lo, hi).expect("validated range");
    for _ in 0..PD_ATTEMPTS {
        for i in 0..half {
            for j in half..p {
                let c = cross.sample(rng);
                sigma[(i, j)] = c;
                sigma[(j, i)] = c;
            }
        }
        let min_eig = SymmetricEigen::new(sigma.clone()).eigenvalues.min();
        if min_eig > MIN_EIGENVALUE {
            return Ok(sigma);
        }
        if lo == hi {
            // Deterministic cross block: resampling cannot help.
            break;
        }
    }
    Err(Error::NotPositiveDefinite {
        p,
        rho_relevant: spec.rho_relevant,
        rho_irrelevant: spec.rho_irrelevant,
        cross_lo: lo,
        cross_hi: hi,
        attempts: PD_ATTEMPTS,
    })
}

/// Draws rows from `N_p(0, Σ)` through a fixed lower Cholesky factor.
#[derive(Debug, Clone)]
pub struct FeatureSampler {
    factor: DMatrix<f64>,
}

impl FeatureSampler {
    pub fn new(sigma: &DMatrix<f64>) -> Result<Self> {
        if !sigma.is_square() || sigma.nrows() == 0 {
            return Err(Error::InvalidInput("covariance must be a non-empty square matrix".into()));
        }
        let chol = Cholesky::<f64, Dyn>::new(sigma.clone()).ok_or(Error::Factorization)?;
        Ok(Self { factor: chol.l() })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let p = self.dim();
        // Standard normals are drawn row by row so the i-th row depends only on
        // the first (i+1)·p draws.
        let mut z = DMatrix::<f64>::zeros(n, p);
        for i in 0..n {
            for k in 0..p {
                z[(i, k)] = StandardNormal.sample(rng);
            }
        }
        z * self.factor.transpose()
    }
}

pub fn sample_features<R: Rng + ?Sized>(sigma: &DMatrix<f64>, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    Ok(FeatureSampler::new(sigma)?.sample(n, rng))
}

pub fn generate_response<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    effect: &EffectSpec,
    rng: &mut R,
) -> Result<DVector<f64>> {
    effect.validate()?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("feature matrix contains non-finite values".into()));
    }
    let beta = effect.coefficients(x.ncols());
    let sd = effect.noise_variance.sqrt();
    let mut y = x * beta;
    for yi in y.iter_mut() {
        let eps: f64 = StandardNormal.sample(rng);
        *yi += effect.intercept + sd * eps;
    }
    Ok(y)
}

/// A condition together with its realised covariance matrix.
///
/// The cross-block correlations are drawn once per condition so every
/// replication samples from the same population.
#[derive(Debug, Clone)]
pub struct Population {
    pub condition: Condition,
    pub sigma: DMatrix<f64>,
    sampler: FeatureSampler,
}

impl Population {
    pub fn new(condition: Condition, base_seed: u64) -> Result<Self> {
        let mut rng = derive_stream(base_seed, condition.id, 0, labels::CROSS_CORR);
        let sigma = build_covariance(&condition.covariance, &mut rng)?;
        let sampler = FeatureSampler::new(&sigma)?;
        Ok(Self {
            condition,
            sigma,
            sampler,
        })
    }

    pub fn sampler(&self) -> &FeatureSampler {
        &self.sampler
    }
}

pub fn generate_replication(pop: &Population, replication: u64, base_seed: u64) -> Result<PairedReplication> {
    let cond = &pop.condition;
    let mut feat_rng = derive_stream(base_seed, cond.id, replication, labels::FEATURES);
    let x = pop.sampler.sample(cond.n, &mut feat_rng);

    let mut large_rng = derive_stream(base_seed, cond.id, replication, labels::NOISE_LARGE);
    let y_large = generate_response(&x, &EffectSpec::larger(cond.noise_var), &mut large_rng)?;
    let mut small_rng = derive_stream(base_seed, cond.id, replication, labels::NOISE_SMALL);
    let y_small = generate_response(&x, &EffectSpec::smaller(cond.noise_var), &mut small_rng)?;

    Ok(PairedReplication {
        x,
        y_large,
        y_small,
        condition_id: cond.id,
        replication,
    })
}

/// Noise-free normalised radial map, values in `[0.5, 1]` with 1 at the centre.
pub fn radial_base(cfg: &RadialConfig) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    let g = cfg.grid;
    let c = (g as f64 + 1.0) / 2.0;
    let dist = DMatrix::from_fn(g, g, |i, j| {
        let dx = (i + 1) as f64 - c;
        let dy = (j + 1) as f64 - c;
        (dx * dx + dy * dy).sqrt()
    });
    let max_d = dist.max();
    let decay = dist.map(|d| 1.0 - d / max_d);
    let m = decay.component_mul(&decay);
    let max_m = m.max();
    let shifted = m.add_scalar(max_m);
    let max_shifted = shifted.max();
    Ok(shifted / max_shifted)
}

/// Activation map for one stimulus, flattened row-major.
pub fn voxel_map<R: Rng + ?Sized>(y: f64, m_norm: &DMatrix<f64>, noise_sd: f64, rng: &mut R) -> Vec<f64> {
    let g_rows = m_norm.nrows();
    let g_cols = m_norm.ncols();
    let mut pos = Vec::with_capacity(g_rows * g_cols);
    for i in 0..g_rows {
        for j in 0..g_cols {
            let eps: f64 = StandardNormal.sample(rng);
            pos.push(m_norm[(i, j)] + noise_sd * eps);
        }
    }
    if y >= 0.0 {
        pos.iter_mut().for_each(|v| *v *= y);
    } else {
        let min = pos.iter().copied().fold(f64::INFINITY, f64::min);
        pos.iter_mut().for_each(|v| *v = (1.0 - *v + min) * y);
    }
    pos
}

fn voxel_matrix<R: Rng + ?Sized>(y: &DVector<f64>, m_norm: &DMatrix<f64>, noise_sd: f64, rng: &mut R) -> DMatrix<f64> {
    let n_vox = m_norm.len();
    let mut v = DMatrix::<f64>::zeros(y.len(), n_vox);
    for (i, &yi) in y.iter().enumerate() {
        let row = voxel_map(yi, m_norm, noise_sd, rng);
        for (j, val) in row.into_iter().enumerate() {
            v[(i, j)] = val;
        }
    }
    v
}

pub fn generate_voxel_replication(
    pop: &Population,
    radial: &RadialConfig,
    replication: u64,
    base_seed: u64,
) -> Result<VoxelDataset> {
    let m_norm = radial_base(radial)?;
    let base = generate_replication(pop, replication, base_seed)?;
    let id = pop.condition.id;
    let mut rng_l = derive_stream(base_seed, id, replication, labels::VOXEL_NOISE_LARGE);
    let v_large = voxel_matrix(&base.y_large, &m_norm, radial.noise_sd, &mut rng_l);
    let mut rng_s = derive_stream(base_seed, id, replication, labels::VOXEL_NOISE_SMALL);
    let v_small = voxel_matrix(&base.y_small, &m_norm, radial.noise_sd, &mut rng_s);
    Ok(VoxelDataset {
        x: base.x,
        y_large: base.y_large,
        y_small: base.y_small,
        v_large,
        v_small,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn cond(n: usize, p: usize, rr: f64, ri: f64) -> Condition {
        Condition {
            id: 0,
            n,
            noise_var: 5.0,
            covariance: CovarianceSpec::new(p, rr, ri),
        }
    }

    #[test]
    fn zero_cross_range_gives_exact_blocks() {
        let spec = CovarianceSpec {
            p: 4,
            rho_relevant: 0.2,
            rho_irrelevant: 0.4,
            cross_range: (0.0, 0.0),
        };
        let s = build_covariance(&spec, &mut rng(1)).unwrap();
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[1.0, 0.2, 0.0, 0.0, 0.2, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.4, 0.0, 0.0, 0.4, 1.0],
        );
        assert_eq!(s, expected);
    }

    #[test]
    fn two_features_single_cross_entry() {
        let spec = CovarianceSpec {
            p: 2,
            rho_relevant: 0.7,
            rho_irrelevant: 0.3,
            cross_range: (0.05, 0.05),
        };
        let s = build_covariance(&spec, &mut rng(1)).unwrap();
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[1.0, 0.05, 0.05, 1.0]));
    }

    #[test]
    fn covariance_is_symmetric_unit_diagonal() {
        let spec = CovarianceSpec::new(20, 0.2, 0.8);
        let s = build_covariance(&spec, &mut rng(9)).unwrap();
        for i in 0..20 {
            assert_eq!(s[(i, i)], 1.0);
            for j in 0..20 {
                assert_eq!(s[(i, j)], s[(j, i)]);
            }
        }
        for i in 0..10 {
            for j in 10..20 {
                assert!((0.0..=0.1).contains(&s[(i, j)]));
            }
        }
    }

    #[test]
    fn non_pd_spec_is_rejected() {
        // Strong cross-block correlation with uncorrelated blocks is not PD.
        let spec = CovarianceSpec {
            p: 6,
            rho_relevant: 0.0,
            rho_irrelevant: 0.0,
            cross_range: (0.9, 0.9),
        };
        let err = build_covariance(&spec, &mut rng(1)).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { p: 6, .. }), "{err}");
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(CovarianceSpec::new(3, 0.2, 0.2).validate().is_err());
        assert!(CovarianceSpec::new(0, 0.2, 0.2).validate().is_err());
        assert!(CovarianceSpec::new(4, 1.0, 0.2).validate().is_err());
        let mut s = CovarianceSpec::new(4, 0.2, 0.2);
        s.cross_range = (0.2, 0.1);
        assert!(s.validate().is_err());
    }

    #[test]
    fn sample_identity_covariance() {
        let x = sample_features(&DMatrix::identity(2, 2), 10_000, &mut rng(3)).unwrap();
        let n = x.nrows() as f64;
        let cov = |a: usize, b: usize| {
            let ma = x.column(a).mean();
            let mb = x.column(b).mean();
            x.column(a).iter().zip(x.column(b).iter()).map(|(u, v)| (u - ma) * (v - mb)).sum::<f64>() / (n - 1.0)
        };
        assert!((cov(0, 0) - 1.0).abs() < 0.05);
        assert!((cov(1, 1) - 1.0).abs() < 0.05);
        assert!(cov(0, 1).abs() < 0.05);
    }

    #[test]
    fn sample_correlated_pair() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]);
        let x = sample_features(&sigma, 10_000, &mut rng(4)).unwrap();
        let a: Vec<f64> = x.column(0).iter().copied().collect();
        let b: Vec<f64> = x.column(1).iter().copied().collect();
        let r = crate::rdm::pearson(&a, &b).unwrap();
        assert!((r - 0.2).abs() < 0.05, "r = {r}");
    }

    #[test]
    fn single_row_sample() {
        let x = sample_features(&DMatrix::identity(5, 5), 1, &mut rng(5)).unwrap();
        assert_eq!(x.shape(), (1, 5));
        assert!(x.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn non_pd_sigma_fails_factorization() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(sample_features(&sigma, 3, &mut rng(1)), Err(Error::Factorization)));
    }

    #[test]
    fn intercept_only_response() {
        let x = sample_features(&DMatrix::identity(4, 4), 50, &mut rng(6)).unwrap();
        let y = generate_response(&x, &EffectSpec::new(0.0, 0.0), &mut rng(7)).unwrap();
        assert!(y.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn noiseless_response_is_exact() {
        let x = sample_features(&DMatrix::identity(6, 6), 100, &mut rng(8)).unwrap();
        let eff = EffectSpec::larger(0.0);
        let y = generate_response(&x, &eff, &mut rng(9)).unwrap();
        for i in 0..100 {
            let lin: f64 = 1.0 + (0..3).map(|k| 0.5 * x[(i, k)]).sum::<f64>();
            assert!((y[i] - lin).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_variance_matches_noise() {
        let x = sample_features(&DMatrix::identity(4, 4), 100_000, &mut rng(10)).unwrap();
        let eff = EffectSpec::larger(5.0);
        let y = generate_response(&x, &eff, &mut rng(11)).unwrap();
        let beta = eff.coefficients(4);
        let resid: Vec<f64> = (&y - &x * beta).iter().map(|v| v - 1.0).collect();
        let m = resid.iter().sum::<f64>() / resid.len() as f64;
        let var = resid.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (resid.len() as f64 - 1.0);
        assert!((var - 5.0).abs() < 0.1, "var = {var}");
    }

    #[test]
    fn replication_is_deterministic_and_separated() {
        let pop = Population::new(cond(30, 20, 0.2, 0.2), 42).unwrap();
        let a = generate_replication(&pop, 1, 42).unwrap();
        let b = generate_replication(&pop, 1, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_replication(&pop, 2, 42).unwrap();
        assert_ne!(a.x, c.x);
        // Same features, different noise.
        let beta_l = EffectSpec::larger(5.0).coefficients(20);
        let beta_s = EffectSpec::smaller(5.0).coefficients(20);
        let eps_l = &a.y_large - &a.x * beta_l;
        let eps_s = &a.y_small - &a.x * beta_s;
        assert_ne!(eps_l, eps_s);
    }

    #[test]
    fn radial_base_shape_and_range() {
        let m = radial_base(&RadialConfig::default()).unwrap();
        assert_eq!(m.shape(), (11, 11));
        assert_eq!(m[(5, 5)], 1.0);
        assert!((m[(0, 0)] - 0.5).abs() < 1e-15);
        assert!(m.iter().all(|&v| (0.5..=1.0).contains(&v)));
        let maxima = m.iter().filter(|&&v| v == 1.0).count();
        assert_eq!(maxima, 1);
        for i in 0..11 {
            for j in 0..11 {
                // 90 degree rotation: (i, j) -> (j, G-1-i)
                assert!((m[(i, j)] - m[(j, 10 - i)]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn radial_config_validation() {
        assert!(RadialConfig { grid: 10, noise_sd: 0.2 }.validate().is_err());
        assert!(RadialConfig { grid: 1, noise_sd: 0.2 }.validate().is_err());
        assert!(RadialConfig { grid: 5, noise_sd: -1.0 }.validate().is_err());
    }

    #[test]
    fn voxel_map_cases() {
        let m = radial_base(&RadialConfig::default()).unwrap();
        assert!(voxel_map(0.0, &m, 0.2, &mut rng(1)).iter().all(|&v| v == 0.0));

        let pos = voxel_map(2.0, &m, 0.0, &mut rng(1));
        for i in 0..11 {
            for j in 0..11 {
                assert_eq!(pos[i * 11 + j], 2.0 * m[(i, j)]);
            }
        }

        let neg = voxel_map(-1.0, &m, 0.0, &mut rng(1));
        assert!((neg[5 * 11 + 5] + 0.5).abs() < 1e-15);
        assert!((neg[0] + 1.0).abs() < 1e-15);
        let max = neg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(max, neg[60]);
    }

    #[test]
    fn noiseless_voxel_sign_contract() {
        let m = radial_base(&RadialConfig::default()).unwrap();
        for y in [-3.0, -0.1, 0.0, 0.4, 7.0] {
            for v in voxel_map(y, &m, 0.0, &mut rng(2)) {
                assert!(v == 0.0 || v.signum() == f64::signum(y));
            }
        }
    }

    #[test]
    fn voxel_replication_shape_and_determinism() {
        let pop = Population::new(cond(100, 20, 0.2, 0.4), 5).unwrap();
        let radial = RadialConfig::default();
        let a = generate_voxel_replication(&pop, &radial, 3, 5).unwrap();
        assert_eq!(a.v_large.shape(), (100, 121));
        assert_eq!(a.v_small.shape(), (100, 121));
        let b = generate_voxel_replication(&pop, &radial, 3, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_voxel_rows_are_scaled_templates() {
        let pop = Population::new(cond(20, 4, 0.2, 0.2), 1).unwrap();
        let radial = RadialConfig { grid: 5, noise_sd: 0.0 };
        let m = radial_base(&radial).unwrap();
        let min = m.min();
        let d = generate_voxel_replication(&pop, &radial, 0, 1).unwrap();
        for i in 0..20 {
            let y = d.y_large[i];
            for r in 0..5 {
                for c in 0..5 {
                    let template = if y >= 0.0 { m[(r, c)] } else { 1.0 - m[(r, c)] + min };
                    assert!((d.v_large[(i, r * 5 + c)] - template * y).abs() < 1e-12);
                }
            }
        }
    }
}

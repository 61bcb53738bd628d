//! Random-intercept linear mixed model fitted by REML.
//!
//! Model: `y_gj = b₀ + x_gjᵀβ + u_j + ε_gj`, `u_j ~ N(0, σ_α²)`, `ε ~ N(0, σ_ε²)`,
//! with every group `j` holding the same number of rows `m`. With
//! `θ = σ_α²/σ_ε²` the scaled covariance of a group is `I + θ·11ᵀ`, whose
//! inverse is `I − c·11ᵀ` with `c = θ/(1 + mθ)`. The profiled REML criterion
//! therefore depends on the data only through a handful of cross-products,
//! which are accumulated once; each evaluation in θ costs one small Cholesky.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

const LOG_THETA_MIN: f64 = -18.420680743952367; // ln 1e-8
const LOG_THETA_MAX: f64 = 18.420680743952367; // ln 1e8
const COARSE_POINTS: usize = 41;
const BRENT_TOL: f64 = 1e-10;
const BRENT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct LmmFit {
    /// Fixed effects, intercept first.
    pub beta_hat: DVector<f64>,
    pub sigma_alpha2: f64,
    pub sigma_eps2: f64,
    pub sigma_f2: f64,
    pub r2_conditional: f64,
    pub theta: f64,
    /// −2 × restricted log-likelihood at the optimum.
    pub reml_deviance: f64,
}

pub fn conditional_r2(sigma_f2: f64, sigma_alpha2: f64, sigma_eps2: f64) -> f64 {
    let explained = sigma_f2 + sigma_alpha2;
    explained / (explained + sigma_eps2)
}

/// REML evaluation at one variance ratio.
#[derive(Debug, Clone)]
pub struct RemlPoint {
    pub theta: f64,
    /// Fixed effects on the original (uncentred) scale, intercept first.
    pub beta: DVector<f64>,
    pub sigma_eps2: f64,
    pub deviance: f64,
}

/// Sufficient statistics of a balanced random-intercept problem.
///
/// Columns and response are centred on their grand means before
/// accumulation; the intercept absorbs the shift.
#[derive(Debug, Clone)]
pub struct RemlProfile {
    n_total: usize,
    n_groups: usize,
    group_size: usize,
    /// Grand means of the feature columns.
    x_means: DVector<f64>,
    y_mean: f64,
    /// DᵀD with D = [1, X_centred].
    dtd: DMatrix<f64>,
    /// Σ_j s_j s_jᵀ, s_j = D_jᵀ1.
    group_outer: DMatrix<f64>,
    dty: DVector<f64>,
    /// Σ_j s_j t_j, t_j = 1ᵀy_j.
    group_cross: DVector<f64>,
    yty: f64,
    /// Σ_j t_j².
    group_tt: f64,
}

impl RemlProfile {
    /// Long-format input: one row per (stimulus, group) observation.
    pub fn from_long(x_long: &DMatrix<f64>, group: &[usize], y_long: &DVector<f64>) -> Result<Self> {
        let (n_total, p) = x_long.shape();
        if group.len() != n_total || y_long.len() != n_total {
            return Err(Error::InvalidInput(format!(
                "long-format lengths differ: {} rows, {} labels, {} responses",
                n_total,
                group.len(),
                y_long.len()
            )));
        }
        if x_long.iter().chain(y_long.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite values in mixed-model input".into()));
        }
        let mut index: BTreeMap<usize, usize> = BTreeMap::new();
        let mut counts: Vec<usize> = Vec::new();
        let gid: Vec<usize> = group
            .iter()
            .map(|label| {
                let next = index.len();
                let id = *index.entry(*label).or_insert(next);
                if id == counts.len() {
                    counts.push(0);
                }
                counts[id] += 1;
                id
            })
            .collect();
        let n_groups = counts.len();
        if n_groups < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 groups, got {n_groups}")));
        }
        let m = counts[0];
        if counts.iter().any(|&c| c != m) {
            let min = counts.iter().min().unwrap();
            let max = counts.iter().max().unwrap();
            return Err(Error::UnbalancedDesign(format!("group sizes range from {min} to {max}")));
        }

        let x_means = DVector::from_fn(p, |k, _| x_long.column(k).mean());
        let y_mean = y_long.mean();
        let k = p + 1;
        let mut dtd = DMatrix::<f64>::zeros(k, k);
        let mut dty = DVector::<f64>::zeros(k);
        let mut sums = vec![DVector::<f64>::zeros(k); n_groups];
        let mut tsum = vec![0.0; n_groups];
        let mut yty = 0.0;
        let mut d = DVector::<f64>::zeros(k);
        for r in 0..n_total {
            d[0] = 1.0;
            for c in 0..p {
                d[c + 1] = x_long[(r, c)] - x_means[c];
            }
            let yr = y_long[r] - y_mean;
            dtd.ger(1.0, &d, &d, 1.0);
            dty.axpy(yr, &d, 1.0);
            yty += yr * yr;
            sums[gid[r]] += &d;
            tsum[gid[r]] += yr;
        }
        let mut group_outer = DMatrix::<f64>::zeros(k, k);
        let mut group_cross = DVector::<f64>::zeros(k);
        let mut group_tt = 0.0;
        for (s, &t) in sums.iter().zip(&tsum) {
            group_outer.ger(1.0, s, s, 1.0);
            group_cross.axpy(t, s, 1.0);
            group_tt += t * t;
        }
        Self::assemble(n_total, n_groups, m, x_means, y_mean, dtd, group_outer, dty, group_cross, yty, group_tt)
    }

    /// Stimulus-level features `x` (n × p) replicated across the `J` columns of `v`
    /// (n × J), i.e. observation (i, j) has features `x_i` and response `v_ij`.
    pub fn from_replicated(x: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        let n_groups = v.ncols();
        if v.nrows() != n {
            return Err(Error::InvalidInput(format!(
                "feature rows ({n}) and response rows ({}) differ",
                v.nrows()
            )));
        }
        if n_groups < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 groups, got {n_groups}")));
        }
        if x.iter().chain(v.iter()).any(|val| !val.is_finite()) {
            return Err(Error::InvalidInput("non-finite values in mixed-model input".into()));
        }
        let k = p + 1;
        let jf = n_groups as f64;
        let x_means = DVector::from_fn(p, |c, _| x.column(c).mean());
        let y_mean = v.mean();
        let d = DMatrix::from_fn(n, k, |i, c| if c == 0 { 1.0 } else { x[(i, c - 1)] - x_means[c - 1] });
        let dtd = d.tr_mul(&d) * jf;
        // Each group's column sums of D are (n, 0, …, 0) after centring.
        let mut group_outer = DMatrix::<f64>::zeros(k, k);
        group_outer[(0, 0)] = jf * (n as f64) * (n as f64);
        let row_sums = DVector::from_fn(n, |i, _| v.row(i).iter().map(|val| val - y_mean).sum::<f64>());
        let dty = d.tr_mul(&row_sums);
        let mut yty = 0.0;
        let mut group_tt = 0.0;
        let mut total_t = 0.0;
        for j in 0..n_groups {
            let mut t = 0.0;
            for i in 0..n {
                let yc = v[(i, j)] - y_mean;
                yty += yc * yc;
                t += yc;
            }
            group_tt += t * t;
            total_t += t;
        }
        let mut group_cross = DVector::<f64>::zeros(k);
        group_cross[0] = n as f64 * total_t;
        Self::assemble(n * n_groups, n_groups, n, x_means, y_mean, dtd, group_outer, dty, group_cross, yty, group_tt)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        n_total: usize,
        n_groups: usize,
        group_size: usize,
        x_means: DVector<f64>,
        y_mean: f64,
        dtd: DMatrix<f64>,
        group_outer: DMatrix<f64>,
        dty: DVector<f64>,
        group_cross: DVector<f64>,
        yty: f64,
        group_tt: f64,
    ) -> Result<Self> {
        let k = dtd.nrows();
        if n_total <= k {
            return Err(Error::TooFewObservations {
                n: n_total,
                p: k - 1,
            });
        }
        if yty == 0.0 {
            return Err(Error::InvalidInput("response has zero variance".into()));
        }
        Ok(Self {
            n_total,
            n_groups,
            group_size,
            x_means,
            y_mean,
            dtd,
            group_outer,
            dty,
            group_cross,
            yty,
            group_tt,
        })
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    fn n_fixed(&self) -> usize {
        self.dtd.nrows()
    }

    /// Fixed effects on the centred scale plus the scaled residual quadratic form.
    fn solve_centered(&self, theta: f64) -> Result<(DVector<f64>, f64, f64)> {
        let m = self.group_size as f64;
        let c = theta / (1.0 + m * theta);
        let xtx = &self.dtd - &self.group_outer * c;
        let xty = &self.dty - &self.group_cross * c;
        let chol = Cholesky::<f64, Dyn>::new(xtx.clone()).ok_or(Error::RankDeficient)?;
        let beta = chol.solve(&xty);
        let yhy = self.yty - c * self.group_tt;
        let q = (yhy - beta.dot(&xty)).max(f64::MIN_POSITIVE);
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok((beta, q, log_det))
    }

    /// −2 × profiled restricted log-likelihood at `theta`.
    pub fn deviance(&self, theta: f64) -> Result<f64> {
        Ok(self.evaluate(theta)?.deviance)
    }

    pub fn evaluate(&self, theta: f64) -> Result<RemlPoint> {
        if !(theta >= 0.0) || !theta.is_finite() {
            return Err(Error::InvalidInput(format!("variance ratio must be finite and >= 0, got {theta}")));
        }
        let (beta_c, q, log_det_c) = self.solve_centered(theta)?;
        let dof = (self.n_total - self.n_fixed()) as f64;
        let sigma_eps2 = q / dof;
        let log_det_h = self.n_groups as f64 * (self.group_size as f64 * theta).ln_1p();
        let deviance = dof * (1.0 + (2.0 * std::f64::consts::PI * sigma_eps2).ln()) + log_det_h + log_det_c;
        let mut beta = beta_c;
        let shift: f64 = (1..beta.len()).map(|c| beta[c] * self.x_means[c - 1]).sum();
        beta[0] += self.y_mean - shift;
        Ok(RemlPoint {
            theta,
            beta,
            sigma_eps2,
            deviance,
        })
    }

    /// Population variance of the fixed-effect predictions over all rows.
    fn fixed_effect_variance(&self, beta: &DVector<f64>) -> f64 {
        // On centred columns the prediction mean is the intercept, so the
        // slope block of DᵀD is N times the covariance of the columns.
        let k = self.n_fixed();
        let slopes = beta.rows(1, k - 1);
        let block = self.dtd.view((1, 1), (k - 1, k - 1));
        (slopes.transpose() * block * slopes)[(0, 0)] / self.n_total as f64
    }

    pub fn fit(&self) -> Result<LmmFit> {
        let objective = |t: f64| self.deviance(t.exp());

        // Coarse scan over log θ to bracket the global optimum.
        let step = (LOG_THETA_MAX - LOG_THETA_MIN) / (COARSE_POINTS - 1) as f64;
        let grid: Vec<f64> = (0..COARSE_POINTS).map(|i| LOG_THETA_MIN + step * i as f64).collect();
        let values = grid.iter().map(|&t| objective(t)).collect::<Result<Vec<_>>>()?;
        let best = values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc })
            .0;
        let lo = grid[best.saturating_sub(1)];
        let hi = grid[(best + 1).min(COARSE_POINTS - 1)];
        let (t_opt, f_opt) = brent_minimize(&objective, lo, hi)?;
        let (t_opt, f_opt) = if values[best] < f_opt {
            (grid[best], values[best])
        } else {
            (t_opt, f_opt)
        };
        // The scan never reaches the boundary θ = 0 itself.
        let theta = if best == 0 && self.deviance(0.0)? <= f_opt { 0.0 } else { t_opt.exp() };
        let point = self.evaluate(theta)?;
        let sigma_eps2 = point.sigma_eps2;
        let sigma_alpha2 = theta * sigma_eps2;
        let sigma_f2 = self.fixed_effect_variance(&point.beta);
        Ok(LmmFit {
            r2_conditional: conditional_r2(sigma_f2, sigma_alpha2, sigma_eps2),
            beta_hat: point.beta,
            sigma_alpha2,
            sigma_eps2,
            sigma_f2,
            theta,
            reml_deviance: point.deviance,
        })
    }
}

/// Brent's method (golden section with parabolic steps) on `[a, b]`.
fn brent_minimize<F>(f: &F, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    const GOLDEN: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (a, b);
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..BRENT_MAX_ITER {
        let xm = 0.5 * (a + b);
        let tol1 = BRENT_TOL * x.abs() + 1e-12;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            return Ok((x, fx));
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u)?;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Err(Error::NoConvergence { lo: a, hi: b })
}

pub fn lmm_fit(x_long: &DMatrix<f64>, voxel_id: &[usize], y_long: &DVector<f64>) -> Result<LmmFit> {
    RemlProfile::from_long(x_long, voxel_id, y_long)?.fit()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linmod::ols::{ols_fit, with_intercept};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, StandardNormal};

    /// Long-format data: n stimuli × J groups, features replicated per group.
    fn long_data(n: usize, j: usize, p: usize, sd_u: f64, seed: u64) -> (DMatrix<f64>, Vec<usize>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
        let u: Vec<f64> = (0..j).map(|_| Normal::new(0.0, sd_u).unwrap().sample(&mut rng)).collect();
        let rows = n * j;
        let x_long = DMatrix::from_fn(rows, p, |r, c| x[(r % n, c)]);
        let groups: Vec<usize> = (0..rows).map(|r| r / n).collect();
        let y = DVector::from_fn(rows, |r, _| {
            let i = r % n;
            1.0 + (0..p).map(|c| 0.7 * x[(i, c)]).sum::<f64>() + u[r / n] + Distribution::<f64>::sample(&StandardNormal, &mut rng)
        });
        (x_long, groups, y)
    }

    /// Dense REML deviance, independent of the sufficient-statistic path.
    fn dense_deviance(x_long: &DMatrix<f64>, groups: &[usize], y: &DVector<f64>, theta: f64) -> f64 {
        let n = y.len();
        let d = with_intercept(x_long);
        let k = d.ncols();
        let h = DMatrix::from_fn(n, n, |a, b| {
            let same = if groups[a] == groups[b] { theta } else { 0.0 };
            same + if a == b { 1.0 } else { 0.0 }
        });
        let h_chol = h.clone().cholesky().unwrap();
        let hinv = h_chol.inverse();
        let xhx = d.transpose() * &hinv * &d;
        let beta = xhx.clone().lu().solve(&(d.transpose() * &hinv * y)).unwrap();
        let r = y - &d * beta;
        let q = (r.transpose() * &hinv * &r)[(0, 0)];
        let dof = (n - k) as f64;
        dof * (1.0 + (2.0 * std::f64::consts::PI * q / dof).ln()) + h.determinant().ln() + xhx.determinant().ln()
    }

    #[test]
    fn formula_arithmetic() {
        assert!((conditional_r2(2.0, 1.0, 1.0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn sufficient_statistics_match_dense_deviance() {
        let (x, g, y) = long_data(6, 3, 1, 1.0, 1);
        let profile = RemlProfile::from_long(&x, &g, &y).unwrap();
        for theta in [0.0, 1e-3, 0.2, 1.0, 7.5, 300.0] {
            let a = profile.deviance(theta).unwrap();
            let b = dense_deviance(&x, &g, &y, theta);
            assert!((a - b).abs() < 1e-8 * b.abs().max(1.0), "theta={theta}: {a} vs {b}");
        }
    }

    #[test]
    fn optimum_beats_fine_grid() {
        for seed in 0..5 {
            let (x, g, y) = long_data(6, 3, 1, 0.8, 100 + seed);
            let fit = lmm_fit(&x, &g, &y).unwrap();
            let at_opt = dense_deviance(&x, &g, &y, fit.theta);
            for i in 0..1000 {
                let t = LOG_THETA_MIN + (LOG_THETA_MAX - LOG_THETA_MIN) * i as f64 / 999.0;
                assert!(at_opt <= dense_deviance(&x, &g, &y, t.exp()) + 1e-9);
            }
        }
    }

    #[test]
    fn replicated_matches_long() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, j, p) = (12, 4, 2);
        let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
        let v = DMatrix::from_fn(n, j, |i, c| x[(i, 0)] * (c as f64 + 1.0) + Distribution::<f64>::sample(&StandardNormal, &mut rng));
        let x_long = DMatrix::from_fn(n * j, p, |r, c| x[(r % n, c)]);
        let g: Vec<usize> = (0..n * j).map(|r| r / n).collect();
        let y_long = DVector::from_fn(n * j, |r, _| v[(r % n, r / n)]);
        let a = RemlProfile::from_replicated(&x, &v).unwrap().fit().unwrap();
        let b = lmm_fit(&x_long, &g, &y_long).unwrap();
        assert!((a.r2_conditional - b.r2_conditional).abs() < 1e-10, "{} {} {} {}", a.r2_conditional, b.r2_conditional, a.theta, b.theta);
        assert!((a.beta_hat - b.beta_hat).amax() < 1e-8);
    }

    #[test]
    fn no_random_effect_recovers_ols() {
        let (x, g, y) = long_data(80, 5, 3, 0.0, 7);
        let fit = lmm_fit(&x, &g, &y).unwrap();
        let ols = ols_fit(&x, &y).unwrap();
        assert!(fit.sigma_alpha2 < 0.05 * fit.sigma_eps2);
        assert!((fit.r2_conditional - ols.r2).abs() < 0.05);
    }

    #[test]
    fn theta_zero_is_ols_solution() {
        let (x, g, y) = long_data(20, 4, 2, 1.0, 8);
        let profile = RemlProfile::from_long(&x, &g, &y).unwrap();
        let beta = profile.evaluate(0.0).unwrap().beta;
        let ols = ols_fit(&x, &y).unwrap();
        assert!((beta - ols.beta_hat).amax() < 1e-6);
    }

    #[test]
    fn strong_group_effect_is_detected() {
        let (x, g, y) = long_data(50, 8, 2, 3.0, 9);
        let fit = lmm_fit(&x, &g, &y).unwrap();
        assert!(fit.sigma_alpha2 > 1.0);
        assert!(fit.r2_conditional > fit.sigma_f2 / (fit.sigma_f2 + fit.sigma_alpha2 + fit.sigma_eps2));
        assert!((0.0..=1.0).contains(&fit.r2_conditional));
    }

    #[test]
    fn affine_response_invariance() {
        let (x, g, y) = long_data(30, 4, 2, 1.0, 10);
        let a = lmm_fit(&x, &g, &y).unwrap();
        let b = lmm_fit(&x, &g, &y.map(|v| 4.0 * v - 250.0)).unwrap();
        assert!((a.r2_conditional - b.r2_conditional).abs() < 1e-7);
    }

    #[test]
    fn design_errors() {
        let (x, mut g, y) = long_data(6, 3, 1, 1.0, 11);
        g[0] = 1;
        assert!(matches!(lmm_fit(&x, &g, &y), Err(Error::UnbalancedDesign(_))));
        let (x, _, y) = long_data(6, 3, 1, 1.0, 12);
        assert!(lmm_fit(&x, &[0; 18], &y).is_err());
    }
}

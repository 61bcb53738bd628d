//! The five scoring pipelines. Each maps one dataset to one scalar estimate:
//! a Spearman correlation for the RSA variants, an R² variant for the
//! regression approaches.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linmod::{pca_scores, ridge_cv, ols_fit, RemlProfile};
use crate::rdm::{euclidean_rdm, feature_rdm, Metric, RankedRdm};

pub const DEFAULT_SPLIT_FRACTION: f64 = 0.5;
pub const MIN_FR_RSA_ITEMS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rsa,
    PcaRsa,
    FrRsa,
    Ols,
    Lmm,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Rsa, Method::PcaRsa, Method::FrRsa, Method::Ols, Method::Lmm];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Rsa => "rsa",
            Method::PcaRsa => "pca_rsa",
            Method::FrRsa => "fr_rsa",
            Method::Ols => "ols",
            Method::Lmm => "lmm",
        }
    }

    pub fn is_rsa(&self) -> bool {
        matches!(self, Method::Rsa | Method::PcaRsa | Method::FrRsa)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Large,
    Small,
}

impl Model {
    pub fn as_str(&self) -> &'static str {
        match self {
            Model::Large => "large",
            Model::Small => "small",
        }
    }
}

/// Result of scoring one dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Estimate(f64),
    /// A dissimilarity structure was constant, so no rank correlation exists.
    Degenerate,
}

impl Outcome {
    pub fn estimate(&self) -> Option<f64> {
        match self {
            Outcome::Estimate(v) => Some(*v),
            Outcome::Degenerate => None,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, Outcome::Degenerate)
    }

    pub fn status(&self) -> &'static str {
        match self {
            Outcome::Estimate(_) => "ok",
            Outcome::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodScore {
    pub method: Method,
    pub model: Model,
    pub outcome: Outcome,
}

/// Folds degenerate-RDM failures into [`Outcome::Degenerate`].
fn degenerate_ok<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if e.is_degenerate() => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn column(y: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(y.len(), 1, y.as_slice())
}

/// Ranked feature RDM, or `None` when it is degenerate.
pub fn prepare_features(x: &DMatrix<f64>, metric: Metric) -> Result<Option<RankedRdm>> {
    if x.nrows() < 3 {
        return Err(Error::InvalidInput(format!("RSA needs at least 3 items, got {}", x.nrows())));
    }
    degenerate_ok(feature_rdm(x, metric).and_then(|rdm| RankedRdm::new(&rdm)))
}

/// RSA against a feature RDM that has already been ranked.
pub fn score_rsa_prepared(features: Option<&RankedRdm>, response: &DMatrix<f64>) -> Result<Outcome> {
    let Some(features) = features else {
        return Ok(Outcome::Degenerate);
    };
    let ranked = degenerate_ok(euclidean_rdm(response).and_then(|rdm| RankedRdm::new(&rdm)))?;
    match ranked {
        Some(r) => Ok(Outcome::Estimate(features.rsa(&r)?)),
        None => Ok(Outcome::Degenerate),
    }
}

/// Spearman correlation between the feature RDM (correlation or Euclidean
/// distance) and the Euclidean RDM of the response rows.
pub fn score_rsa(x: &DMatrix<f64>, response: &DMatrix<f64>, feature_metric: Metric) -> Result<Outcome> {
    if x.nrows() != response.nrows() {
        return Err(Error::InvalidInput(format!(
            "feature rows ({}) and response rows ({}) differ",
            x.nrows(),
            response.nrows()
        )));
    }
    let prepared = prepare_features(x, feature_metric)?;
    score_rsa_prepared(prepared.as_ref(), response)
}

pub fn pca_features(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(pca_scores(x)?.scores)
}

pub fn score_pca_rsa(x: &DMatrix<f64>, response: &DMatrix<f64>) -> Result<Outcome> {
    score_rsa(&pca_features(x)?, response, Metric::Correlation)
}

/// Scales column `k` of `x` by `weights[k]` and runs RSA with correlation distance.
pub fn score_reweighted_rsa(x: &DMatrix<f64>, response: &DMatrix<f64>, weights: &DVector<f64>) -> Result<Outcome> {
    if weights.len() != x.ncols() {
        return Err(Error::InvalidInput(format!(
            "{} weights for {} feature columns",
            weights.len(),
            x.ncols()
        )));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Ok(Outcome::Degenerate);
    }
    let weighted = DMatrix::from_fn(x.nrows(), x.ncols(), |i, k| x[(i, k)] * weights[k]);
    score_rsa(&weighted, response, Metric::Correlation)
}

/// Train/test split for FR-RSA: shuffled indices, first `round(n·fraction)` train.
pub fn split_indices<R: Rng + ?Sized>(n: usize, split_fraction: f64, rng: &mut R) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(Error::InvalidInput(format!("split fraction must lie in (0, 1), got {split_fraction}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let n_train = ((n as f64 * split_fraction).round() as usize).clamp(1, n - 1);
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

fn rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |i, k| m[(idx[i], k)])
}

/// Scalar ridge target: the response itself for one column, the row mean otherwise.
pub fn ridge_target(response: &DMatrix<f64>) -> DVector<f64> {
    if response.ncols() == 1 {
        response.column(0).into_owned()
    } else {
        DVector::from_fn(response.nrows(), |i, _| response.row(i).mean())
    }
}

/// FR-RSA with a fixed train/test split; `cv_rng` drives the ridge fold assignment.
pub fn score_fr_rsa_split<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    response: &DMatrix<f64>,
    train: &[usize],
    test: &[usize],
    cv_rng: &mut R,
) -> Result<Outcome> {
    let x_train = rows(x, train);
    let target = ridge_target(&rows(response, train));
    let folds = 10.min(train.len() / 2);
    let fit = ridge_cv(&x_train, &target, folds, cv_rng)?;
    score_reweighted_rsa(&rows(x, test), &rows(response, test), &fit.coefficients)
}

/// Feature-reweighted RSA: ridge weights learned on a training split are
/// applied to the held-out features before RSA on the held-out items.
pub fn score_fr_rsa<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    response: &DMatrix<f64>,
    split_fraction: f64,
    rng: &mut R,
) -> Result<Outcome> {
    let n = x.nrows();
    if n < MIN_FR_RSA_ITEMS {
        return Err(Error::InvalidInput(format!(
            "feature-reweighted RSA needs at least {MIN_FR_RSA_ITEMS} items, got {n}"
        )));
    }
    if response.nrows() != n {
        return Err(Error::InvalidInput("feature and response row counts differ".into()));
    }
    let (train, test) = split_indices(n, split_fraction, rng)?;
    score_fr_rsa_split(x, response, &train, &test, rng)
}

/// Adjusted R² of an OLS fit.
pub fn score_regression(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Outcome> {
    Ok(Outcome::Estimate(ols_fit(x, y)?.r2_adj))
}

/// Conditional R² of a random-intercept model over voxels, with stimulus
/// features replicated for every voxel.
pub fn score_lmm(x: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<Outcome> {
    if v.ncols() < 2 {
        return Err(Error::InvalidInput(format!("mixed model needs at least 2 voxels, got {}", v.ncols())));
    }
    Ok(Outcome::Estimate(RemlProfile::from_replicated(x, v)?.fit()?.r2_conditional))
}

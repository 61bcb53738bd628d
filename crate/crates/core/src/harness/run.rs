use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::output::{round_sig, sort_records, summarize, write_outputs, ConditionKey, ResultRecord, SummaryRow};
use super::stream::{derive_stream, labels};
use crate::error::{Error, Result};
use crate::methods::{
    pca_features, prepare_features, score_fr_rsa_split, score_lmm, score_regression, score_rsa_prepared,
    split_indices, Method, Outcome, MIN_FR_RSA_ITEMS,
};
use crate::rdm::{Metric, RankedRdm};
use crate::simgen::{generate_replication, generate_voxel_replication, Population};

/// Settings shared by every scoring call within one run.
#[derive(Debug, Clone, Copy)]
pub struct ScoreContext {
    pub base_seed: u64,
    pub condition_id: u64,
    pub replication: u64,
    pub feature_metric: Metric,
    pub split_fraction: f64,
}

/// One candidate model: its feature matrix and the response it is scored against.
pub struct ModelData<'a> {
    pub x: &'a DMatrix<f64>,
    pub response: &'a DMatrix<f64>,
}

struct FeatureCache<'a> {
    x: &'a DMatrix<f64>,
    rsa: Option<Option<RankedRdm>>,
    pca: Option<Option<RankedRdm>>,
}

fn cache_index<'a>(caches: &mut Vec<FeatureCache<'a>>, x: &'a DMatrix<f64>) -> usize {
    if let Some(i) = caches.iter().position(|c| std::ptr::eq(c.x, x)) {
        return i;
    }
    caches.push(FeatureCache { x, rsa: None, pca: None });
    caches.len() - 1
}

/// Scores every method on every model. Feature RDMs are computed once per
/// distinct feature matrix; the FR-RSA split is shared by all models.
pub fn score_models(ctx: &ScoreContext, methods: &[Method], models: &[ModelData<'_>]) -> Result<Vec<(Method, usize, Outcome)>> {
    let mut caches: Vec<FeatureCache<'_>> = Vec::new();
    let split = if methods.contains(&Method::FrRsa) {
        let n = models.first().map(|m| m.x.nrows()).unwrap_or(0);
        if n < MIN_FR_RSA_ITEMS {
            return Err(Error::InvalidInput(format!(
                "feature-reweighted RSA needs at least {MIN_FR_RSA_ITEMS} items, got {n}"
            )));
        }
        let mut rng = derive_stream(ctx.base_seed, ctx.condition_id, ctx.replication, labels::FR_SPLIT);
        Some(split_indices(n, ctx.split_fraction, &mut rng)?)
    } else {
        None
    };

    let mut out = Vec::with_capacity(methods.len() * models.len());
    for &method in methods {
        for (k, model) in models.iter().enumerate() {
            let outcome = match method {
                Method::Rsa => {
                    let i = cache_index(&mut caches, model.x);
                    if caches[i].rsa.is_none() {
                        caches[i].rsa = Some(prepare_features(model.x, ctx.feature_metric)?);
                    }
                    score_rsa_prepared(caches[i].rsa.as_ref().unwrap().as_ref(), model.response)?
                }
                Method::PcaRsa => {
                    let i = cache_index(&mut caches, model.x);
                    if caches[i].pca.is_none() {
                        caches[i].pca = Some(prepare_features(&pca_features(model.x)?, Metric::Correlation)?);
                    }
                    score_rsa_prepared(caches[i].pca.as_ref().unwrap().as_ref(), model.response)?
                }
                Method::FrRsa => {
                    let (train, test) = split.as_ref().expect("split drawn");
                    let mut cv = derive_stream(ctx.base_seed, ctx.condition_id, ctx.replication, labels::CV_FOLDS);
                    score_fr_rsa_split(model.x, model.response, train, test, &mut cv)?
                }
                Method::Ols => {
                    if model.response.ncols() != 1 {
                        return Err(Error::InvalidInput("ols needs a single response column".into()));
                    }
                    score_regression(model.x, &model.response.column(0).into_owned())?
                }
                Method::Lmm => score_lmm(model.x, model.response)?,
            };
            let outcome = match outcome {
                Outcome::Estimate(v) => Outcome::Estimate(round_sig(v)),
                d => d,
            };
            out.push((method, k, outcome));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<ResultRecord>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentOutput {
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_outputs(dir, &self.records, &self.summary)
    }
}

/// Runs `f` on a pool of `workers` threads (all available cores if `None`).
pub(crate) fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn condition_key(cfg: &ExperimentConfig, pop: &Population) -> ConditionKey {
    let c = &pop.condition;
    ConditionKey {
        experiment: cfg.experiment.as_str().to_string(),
        condition_id: c.id,
        n: c.n,
        noise_var: Some(c.noise_var),
        p: c.covariance.p,
        rho_rel: Some(c.covariance.rho_relevant),
        rho_irrel: Some(c.covariance.rho_irrelevant),
    }
}

fn run_replication(cfg: &ExperimentConfig, methods: &[Method], pop: &Population, replication: u64) -> Result<Vec<ResultRecord>> {
    let ctx = ScoreContext {
        base_seed: cfg.base_seed,
        condition_id: pop.condition.id,
        replication,
        feature_metric: cfg.feature_metric,
        split_fraction: cfg.fr_split_fraction,
    };
    let scores = if cfg.is_voxel() {
        let data = generate_voxel_replication(pop, &cfg.radial(), replication, cfg.base_seed)?;
        let models = [
            ModelData { x: &data.x, response: &data.v_large },
            ModelData { x: &data.x, response: &data.v_small },
        ];
        score_models(&ctx, methods, &models)?
    } else {
        let data = generate_replication(pop, replication, cfg.base_seed)?;
        let y_large = crate::methods::column(&data.y_large);
        let y_small = crate::methods::column(&data.y_small);
        let models = [
            ModelData { x: &data.x, response: &y_large },
            ModelData { x: &data.x, response: &y_small },
        ];
        score_models(&ctx, methods, &models)?
    };
    let key = condition_key(cfg, pop);
    Ok(scores
        .into_iter()
        .map(|(method, k, outcome)| ResultRecord {
            condition: key.clone(),
            replication,
            method,
            model: if k == 0 { "large".into() } else { "small".into() },
            model_index: k,
            outcome,
        })
        .collect())
}

/// Generates and scores every condition × replication, returning sorted
/// records and their per-method summaries. Replications are numbered from 1.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let methods = cfg.methods();
    let populations = super::config::expand_grid(cfg)?
        .into_iter()
        .map(|c| Population::new(c, cfg.base_seed))
        .collect::<Result<Vec<_>>>()?;
    let items: Vec<(usize, u64)> = (0..populations.len())
        .flat_map(|c| (1..=cfg.replications as u64).map(move |r| (c, r)))
        .collect();

    let nested = in_pool(cfg.workers, || {
        items
            .par_iter()
            .map(|&(c, r)| run_replication(cfg, &methods, &populations[c], r))
            .collect::<Result<Vec<_>>>()
    })??;
    let mut records: Vec<ResultRecord> = nested.into_iter().flatten().collect();
    sort_records(&mut records);
    let summary = summarize(&records);
    Ok(ExperimentOutput { records, summary })
}

/// [`run_experiment`] followed by writing both CSV files to `dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<ExperimentOutput> {
    let out = run_experiment(cfg)?;
    out.write(dir)?;
    Ok(out)
}

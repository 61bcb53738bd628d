//! Regression-vs-RSA comparison on tabular word-norm data.
//!
//! Each composite (a named group of predictor columns) plays the role of a
//! candidate model for one shared response column. Random subsamples of the
//! items are scored exactly like simulated replications.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::harness::output::{sort_records, summarize, ConditionKey, ResultRecord};
use crate::harness::run::{in_pool, score_models, ExperimentOutput, ModelData, ScoreContext};
use crate::harness::stream::{derive_stream, labels};
use crate::methods::{column, Method, DEFAULT_SPLIT_FRACTION};
use crate::rdm::Metric;

pub const EXPERIMENT_NAME: &str = "empirical";
pub const DEFAULT_SIZES: [usize; 6] = [50, 100, 200, 300, 400, 500];
pub const DEFAULT_RESAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositeSpec {
    pub name: String,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Composite {
    pub spec: CompositeSpec,
    /// Items × member columns.
    pub x: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct NormDataset {
    pub labels: Vec<String>,
    pub response: DVector<f64>,
    /// In priority order: the first composite is expected to win.
    pub composites: Vec<Composite>,
    /// Rows dropped for missing or non-numeric entries.
    pub dropped: usize,
}

impl NormDataset {
    pub fn n_items(&self) -> usize {
        self.response.len()
    }

    /// Number of distinct predictor columns across all composites.
    pub fn n_predictors(&self) -> usize {
        self.composites
            .iter()
            .flat_map(|c| c.spec.columns.iter())
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// z-scores every predictor column (sample SD); constant columns are only centred.
    pub fn standardized(&self) -> Self {
        let mut out = self.clone();
        for c in &mut out.composites {
            let n = c.x.nrows() as f64;
            for mut col in c.x.column_iter_mut() {
                let mean = col.mean();
                let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                let scale = if sd > 0.0 { sd } else { 1.0 };
                col.apply(|v| *v = (*v - mean) / scale);
            }
        }
        out
    }
}

fn parse_cell(s: &str) -> Option<f64> {
    let t = s.trim();
    if t.is_empty() {
        return None;
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a header-row CSV, keeping rows whose response and composite
/// columns all parse as finite decimals.
pub fn load_norms(
    path: &Path,
    response_column: &str,
    composites: &[CompositeSpec],
    label_column: Option<&str>,
) -> Result<NormDataset> {
    if composites.len() < 2 {
        return Err(Error::Config("at least two composites are needed".into()));
    }
    for c in composites {
        if c.columns.len() < 2 {
            return Err(Error::Config(format!("composite `{}` needs at least 2 predictor columns", c.name)));
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Config(format!("{}: {other:?}", path.display())),
        })?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let resp_idx = find(response_column)?;
    let label_idx = label_column.map(find).transpose()?;
    let comp_idx: Vec<Vec<usize>> = composites
        .iter()
        .map(|c| c.columns.iter().map(|name| find(name)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;

    let mut labels = Vec::new();
    let mut response = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); composites.len()];
    let mut dropped = 0;
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let get = |i: usize| record.get(i).and_then(parse_cell);
        let Some(r) = get(resp_idx) else {
            dropped += 1;
            continue;
        };
        let rows: Option<Vec<Vec<f64>>> = comp_idx
            .iter()
            .map(|idx| idx.iter().map(|&i| get(i)).collect::<Option<Vec<f64>>>())
            .collect();
        let Some(rows) = rows else {
            dropped += 1;
            continue;
        };
        response.push(r);
        labels.push(match label_idx {
            Some(i) => record.get(i).unwrap_or("").to_string(),
            None => (row_no + 1).to_string(),
        });
        for (dst, row) in values.iter_mut().zip(rows) {
            dst.extend(row);
        }
    }
    let n = response.len();
    if n == 0 {
        return Err(Error::InvalidInput(format!("no complete rows in {}", path.display())));
    }
    let composites = composites
        .iter()
        .zip(values)
        .map(|(spec, v)| Composite {
            x: DMatrix::from_row_slice(n, spec.columns.len(), &v),
            spec: spec.clone(),
        })
        .collect();
    Ok(NormDataset {
        labels,
        response: DVector::from_vec(response),
        composites,
        dropped,
    })
}

fn ordered_composites<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<CompositeSpec>, D::Error> {
    let map = serde_json::Map::<String, serde_json::Value>::deserialize(d)?;
    map.into_iter()
        .map(|(name, v)| {
            let columns: Vec<String> = serde_json::from_value(v).map_err(serde::de::Error::custom)?;
            Ok(CompositeSpec { name, columns })
        })
        .collect()
}

fn default_sizes() -> Vec<usize> {
    DEFAULT_SIZES.to_vec()
}

fn default_resamples() -> usize {
    DEFAULT_RESAMPLES
}

fn default_methods() -> Vec<Method> {
    vec![Method::Rsa, Method::PcaRsa, Method::FrRsa, Method::Ols]
}

fn default_split() -> f64 {
    DEFAULT_SPLIT_FRACTION
}

/// Configuration of an empirical run. `composites` is an ordered JSON
/// object `{name: [columns]}` whose first entry is the expected winner.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmpiricalConfig {
    pub response_column: String,
    #[serde(default)]
    pub label_column: Option<String>,
    #[serde(deserialize_with = "ordered_composites")]
    pub composites: Vec<CompositeSpec>,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_split")]
    pub fr_split_fraction: f64,
    #[serde(default)]
    pub feature_metric: Metric,
    #[serde(default)]
    pub standardize: bool,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl EmpiricalConfig {
    pub fn new(response_column: &str, composites: Vec<CompositeSpec>) -> Self {
        Self {
            response_column: response_column.to_string(),
            label_column: None,
            composites,
            sizes: default_sizes(),
            resamples: DEFAULT_RESAMPLES,
            methods: default_methods(),
            base_seed: 0,
            fr_split_fraction: DEFAULT_SPLIT_FRACTION,
            feature_metric: Metric::Correlation,
            standardize: false,
            workers: None,
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.composites.len() < 2 {
            return Err(Error::Config("at least two composites are needed".into()));
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(Error::Config("sizes must be a nonempty list of positive counts".into()));
        }
        if self.resamples == 0 {
            return Err(Error::Config("resamples must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("method list is empty".into()));
        }
        if self.methods.contains(&Method::Lmm) {
            return Err(Error::Config("lmm needs voxel data and is not available for norm datasets".into()));
        }
        if !(self.fr_split_fraction > 0.0 && self.fr_split_fraction < 1.0) {
            return Err(Error::Config("fr_split_fraction must lie in (0, 1)".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn load(&self, path: &Path) -> Result<NormDataset> {
        load_norms(path, &self.response_column, &self.composites, self.label_column.as_deref())
    }
}

fn subset_rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |i, k| m[(idx[i], k)])
}

/// Scores every method on every composite for `resamples` random subsets
/// (without replacement) of each size. Sizes index the `condition_id`
/// column; resamples are numbered from 1.
pub fn subsample_compare(data: &NormDataset, cfg: &EmpiricalConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let n_items = data.n_items();
    if let Some(&max) = cfg.sizes.iter().max() {
        if max > n_items {
            return Err(Error::InvalidInput(format!("sample size {max} exceeds the {n_items} available rows")));
        }
    }
    let data = if cfg.standardize { data.standardized() } else { data.clone() };
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    let p = data.n_predictors();

    let items: Vec<(usize, u64)> = (0..cfg.sizes.len())
        .flat_map(|s| (1..=cfg.resamples as u64).map(move |r| (s, r)))
        .collect();
    let work = |&(s, r): &(usize, u64)| -> Result<Vec<ResultRecord>> {
        let size = cfg.sizes[s];
        let mut rng = derive_stream(cfg.base_seed, s as u64, r, labels::SUBSAMPLE);
        let idx = rand::seq::index::sample(&mut rng, n_items, size).into_vec();
        let y = column(&DVector::from_fn(size, |i, _| data.response[idx[i]]));
        let xs: Vec<DMatrix<f64>> = data.composites.iter().map(|c| subset_rows(&c.x, &idx)).collect();
        let models: Vec<ModelData<'_>> = xs.iter().map(|x| ModelData { x, response: &y }).collect();
        let ctx = ScoreContext {
            base_seed: cfg.base_seed,
            condition_id: s as u64,
            replication: r,
            feature_metric: cfg.feature_metric,
            split_fraction: cfg.fr_split_fraction,
        };
        let key = ConditionKey {
            experiment: EXPERIMENT_NAME.to_string(),
            condition_id: s as u64,
            n: size,
            noise_var: None,
            p,
            rho_rel: None,
            rho_irrel: None,
        };
        Ok(score_models(&ctx, &methods, &models)?
            .into_iter()
            .map(|(method, k, outcome)| ResultRecord {
                condition: key.clone(),
                replication: r,
                method,
                model: data.composites[k].spec.name.clone(),
                model_index: k,
                outcome,
            })
            .collect())
    };
    let nested = in_pool(cfg.workers, || items.par_iter().map(work).collect::<Result<Vec<_>>>())??;
    let mut records: Vec<ResultRecord> = nested.into_iter().flatten().collect();
    sort_records(&mut records);
    Ok(records)
}

/// [`subsample_compare`] plus per-size summaries of the first two composites.
pub fn run_empirical(data: &NormDataset, cfg: &EmpiricalConfig) -> Result<ExperimentOutput> {
    let records = subsample_compare(data, cfg)?;
    let summary = summarize(&records);
    Ok(ExperimentOutput { records, summary })
}

/// Column layout of the synthetic stand-in norms.
pub const SYNTHETIC_STRONG: [&str; 3] = ["freq_subtitle", "freq_web", "age_of_acquisition"];
pub const SYNTHETIC_WEAK: [&str; 3] = ["valence", "arousal", "dominance"];
pub const SYNTHETIC_RESPONSE: &str = "rt";
pub const SYNTHETIC_LABEL: &str = "word";

/// Synthetic norms with a frequency-like composite that explains much of the
/// response and an affect-like composite that explains little. Each member
/// column is a noisy reading of its composite's latent factor, on its own
/// scale; one member of each composite is reverse-coded. About
/// `missing_rate` of the rows have one blank predictor.
pub fn synthetic_norms<R: Rng + ?Sized>(n_words: usize, missing_rate: f64, rng: &mut R) -> Vec<Vec<String>> {
    // (mean, scale, loading on the latent factor)
    const STRONG: [(f64, f64, f64); 3] = [(3.0, 0.8, 1.0), (9.0, 1.5, 0.9), (7.0, 2.0, -0.8)];
    const WEAK: [(f64, f64, f64); 3] = [(5.0, 1.2, 1.0), (4.5, 0.9, -0.7), (5.2, 1.0, 0.8)];
    let mut header: Vec<String> = vec![SYNTHETIC_LABEL.into(), SYNTHETIC_RESPONSE.into()];
    header.extend(SYNTHETIC_STRONG.iter().chain(SYNTHETIC_WEAK.iter()).map(|s| s.to_string()));
    let mut rows = vec![header];
    for i in 0..n_words {
        let f: f64 = StandardNormal.sample(rng);
        let a: f64 = StandardNormal.sample(rng);
        let e: f64 = StandardNormal.sample(rng);
        let rt = 650.0 - 55.0 * f - 20.0 * a + 55.0 * e;
        let mut cells = vec![format!("w{:05}", i + 1), format!("{rt:.2}")];
        for &(mean, scale, load) in &STRONG {
            let z: f64 = StandardNormal.sample(rng);
            cells.push(format!("{:.4}", mean + scale * (load * f + 0.4 * z)));
        }
        for &(mean, scale, load) in &WEAK {
            let z: f64 = StandardNormal.sample(rng);
            cells.push(format!("{:.4}", mean + scale * (load * a + 0.4 * z)));
        }
        if rng.random::<f64>() < missing_rate {
            let col = 2 + rng.random_range(0..6);
            cells[col] = String::new();
        }
        rows.push(cells);
    }
    rows
}

pub fn write_synthetic_norms(path: &Path, n_words: usize, seed: u64) -> Result<()> {
    let mut rng = derive_stream(seed, 0, 0, "synthetic_norms");
    let rows = synthetic_norms(n_words, 0.01, &mut rng);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Config matching the synthetic stand-in: `frequency` first, then `affect`.
pub fn synthetic_config() -> EmpiricalConfig {
    let mut cfg = EmpiricalConfig::new(
        SYNTHETIC_RESPONSE,
        vec![
            CompositeSpec {
                name: "frequency".into(),
                columns: SYNTHETIC_STRONG.iter().map(|s| s.to_string()).collect(),
            },
            CompositeSpec {
                name: "affect".into(),
                columns: SYNTHETIC_WEAK.iter().map(|s| s.to_string()).collect(),
            },
        ],
    );
    cfg.label_column = Some(SYNTHETIC_LABEL.into());
    cfg
}

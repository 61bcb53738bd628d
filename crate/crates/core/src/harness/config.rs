use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::methods::{Method, DEFAULT_SPLIT_FRACTION};
use crate::rdm::Metric;
use crate::simgen::{Condition, CovarianceSpec, RadialConfig};

pub const DEFAULT_REPLICATIONS: usize = 1000;
pub const SAMPLE_SIZES: [usize; 5] = [100, 200, 300, 400, 500];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    SimA,
    SimB,
    SimC,
    SimD,
    Fmri,
    Custom,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::SimA => "sim_a",
            Experiment::SimB => "sim_b",
            Experiment::SimC => "sim_c",
            Experiment::SimD => "sim_d",
            Experiment::Fmri => "fmri",
            Experiment::Custom => "custom",
        }
    }

    fn default_methods(&self) -> Vec<Method> {
        match self {
            Experiment::SimA | Experiment::SimB | Experiment::SimC | Experiment::Custom => {
                vec![Method::Rsa, Method::Ols]
            }
            Experiment::SimD => vec![Method::Rsa, Method::PcaRsa, Method::FrRsa, Method::Ols],
            Experiment::Fmri => vec![Method::Rsa, Method::PcaRsa, Method::FrRsa, Method::Lmm],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Declarative description of one simulation experiment.
///
/// Grid fields left unset take the levels of the named experiment; `custom`
/// starts from the sample-size experiment's levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub methods: Option<Vec<Method>>,
    #[serde(default)]
    pub n_levels: Option<Vec<usize>>,
    #[serde(default)]
    pub noise_levels: Option<Vec<f64>>,
    #[serde(default)]
    pub p_levels: Option<Vec<usize>>,
    /// `(relevant, irrelevant)` within-block correlations.
    #[serde(default)]
    pub collinearity: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    pub cross_range: Option<(f64, f64)>,
    #[serde(default = "default_split")]
    pub fr_split_fraction: f64,
    #[serde(default)]
    pub feature_metric: Metric,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
    /// Generate voxel maps (implied by `fmri`).
    #[serde(default)]
    pub voxel: bool,
    #[serde(default)]
    pub grid_size: Option<usize>,
    #[serde(default)]
    pub map_noise_sd: Option<f64>,
}

fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}

fn default_split() -> f64 {
    DEFAULT_SPLIT_FRACTION
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            replications: DEFAULT_REPLICATIONS,
            base_seed: 0,
            methods: None,
            n_levels: None,
            noise_levels: None,
            p_levels: None,
            collinearity: None,
            cross_range: None,
            fr_split_fraction: DEFAULT_SPLIT_FRACTION,
            feature_metric: Metric::Correlation,
            output_dir: None,
            workers: None,
            voxel: false,
            grid_size: None,
            map_noise_sd: None,
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

    pub fn is_voxel(&self) -> bool {
        self.voxel || self.experiment == Experiment::Fmri
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut m = self.methods.clone().unwrap_or_else(|| self.experiment.default_methods());
        m.sort();
        m.dedup();
        m
    }

    pub fn radial(&self) -> RadialConfig {
        let d = RadialConfig::default();
        RadialConfig {
            grid: self.grid_size.unwrap_or(d.grid),
            noise_sd: self.map_noise_sd.unwrap_or(d.noise_sd),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        let methods = self.methods();
        if methods.is_empty() {
            return Err(Error::Config("method list is empty".into()));
        }
        if methods.contains(&Method::Lmm) && !self.is_voxel() {
            return Err(Error::Config("lmm is only valid for voxel experiments (fmri or custom with voxel=true)".into()));
        }
        if methods.contains(&Method::Ols) && self.is_voxel() {
            return Err(Error::Config("ols needs a scalar response; use lmm for voxel experiments".into()));
        }
        if !(self.fr_split_fraction > 0.0 && self.fr_split_fraction < 1.0) {
            return Err(Error::Config(format!(
                "fr_split_fraction must lie in (0, 1), got {}",
                self.fr_split_fraction
            )));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.is_voxel() {
            self.radial().validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        for cond in expand_grid(self)? {
            cond.covariance.validate().map_err(|e| Error::Config(e.to_string()))?;
            if !(cond.noise_var >= 0.0) || !cond.noise_var.is_finite() {
                return Err(Error::Config(format!("invalid noise variance {}", cond.noise_var)));
            }
            let min_n = if methods.contains(&Method::FrRsa) {
                crate::methods::MIN_FR_RSA_ITEMS
            } else {
                3
            };
            if cond.n < min_n {
                return Err(Error::Config(format!("sample size {} is below the minimum {min_n}", cond.n)));
            }
            if methods.contains(&Method::Ols) && cond.n <= cond.covariance.p + 1 {
                return Err(Error::Config(format!(
                    "sample size {} too small for OLS with {} features",
                    cond.n, cond.covariance.p
                )));
            }
        }
        Ok(())
    }
}

/// Ordered list of conditions: sample size outermost, then noise, feature
/// count and collinearity pair.
pub fn expand_grid(cfg: &ExperimentConfig) -> Result<Vec<Condition>> {
    let (noise, p, col): (Vec<f64>, Vec<usize>, Vec<(f64, f64)>) = match cfg.experiment {
        Experiment::SimA | Experiment::Custom => (vec![5.0], vec![20], vec![(0.2, 0.2)]),
        Experiment::SimB => (vec![5.0, 10.0, 15.0], vec![20], vec![(0.2, 0.2)]),
        Experiment::SimC => (vec![5.0], vec![20, 40, 60], vec![(0.2, 0.2)]),
        Experiment::SimD | Experiment::Fmri => (vec![5.0], vec![20], vec![(0.2, 0.0), (0.2, 0.4), (0.2, 0.8)]),
    };
    let n_levels = cfg.n_levels.clone().unwrap_or_else(|| SAMPLE_SIZES.to_vec());
    let noise = cfg.noise_levels.clone().unwrap_or(noise);
    let p = cfg.p_levels.clone().unwrap_or(p);
    let col = cfg.collinearity.clone().unwrap_or(col);
    let cross_range = cfg.cross_range.unwrap_or((0.0, 0.1));

    let mut out = Vec::new();
    for &n in &n_levels {
        for &noise_var in &noise {
            for &p in &p {
                for &(rr, ri) in &col {
                    out.push(Condition {
                        id: out.len() as u64,
                        n,
                        noise_var,
                        covariance: CovarianceSpec {
                            p,
                            rho_relevant: rr,
                            rho_irrelevant: ri,
                            cross_range,
                        },
                    });
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Config("experiment grid is empty".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_grid_sizes() {
        assert_eq!(expand_grid(&ExperimentConfig::new(Experiment::SimA)).unwrap().len(), 5);
        assert_eq!(expand_grid(&ExperimentConfig::new(Experiment::SimB)).unwrap().len(), 15);
        assert_eq!(expand_grid(&ExperimentConfig::new(Experiment::SimC)).unwrap().len(), 15);
        assert_eq!(expand_grid(&ExperimentConfig::new(Experiment::SimD)).unwrap().len(), 15);
        assert_eq!(expand_grid(&ExperimentConfig::new(Experiment::Fmri)).unwrap().len(), 15);
    }

    #[test]
    fn sim_a_fixed_parameters() {
        let grid = expand_grid(&ExperimentConfig::new(Experiment::SimA)).unwrap();
        let ns: Vec<usize> = grid.iter().map(|c| c.n).collect();
        assert_eq!(ns, vec![100, 200, 300, 400, 500]);
        for (i, c) in grid.iter().enumerate() {
            assert_eq!(c.id, i as u64);
            assert_eq!(c.noise_var, 5.0);
            assert_eq!(c.covariance.p, 20);
            assert_eq!((c.covariance.rho_relevant, c.covariance.rho_irrelevant), (0.2, 0.2));
            assert_eq!(c.covariance.cross_range, (0.0, 0.1));
        }
    }

    #[test]
    fn sim_d_levels() {
        let grid = expand_grid(&ExperimentConfig::new(Experiment::SimD)).unwrap();
        let pairs: Vec<(f64, f64)> = grid[..3].iter().map(|c| (c.covariance.rho_relevant, c.covariance.rho_irrelevant)).collect();
        assert_eq!(pairs, vec![(0.2, 0.0), (0.2, 0.4), (0.2, 0.8)]);
    }

    #[test]
    fn empty_grid_rejected() {
        let mut cfg = ExperimentConfig::new(Experiment::Custom);
        cfg.n_levels = Some(vec![]);
        assert!(matches!(expand_grid(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn json_parsing_and_unknown_keys() {
        let cfg = ExperimentConfig::from_json(r#"{"experiment": "sim_b", "replications": 10, "methods": ["ols", "rsa"]}"#).unwrap();
        assert_eq!(cfg.experiment, Experiment::SimB);
        assert_eq!(cfg.methods(), vec![Method::Rsa, Method::Ols]);
        assert!(ExperimentConfig::from_json(r#"{"experiment": "sim_a", "bogus": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment": "sim_a", "replications": 0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment": "sim_a", "methods": []}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment": "sim_a", "methods": ["lmm"]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment": "fmri", "methods": ["lmm", "rsa"]}"#).is_ok());
        assert!(ExperimentConfig::from_json(r#"{"experiment": "custom", "p_levels": [3]}"#).is_err());
        let cfg = ExperimentConfig::from_json(r#"{"experiment": "custom", "collinearity": [[0.1, 0.5]], "n_levels": [50]}"#).unwrap();
        let grid = expand_grid(&cfg).unwrap();
        assert_eq!(grid.len(), 1);
        assert_eq!(grid[0].covariance.rho_irrelevant, 0.5);
    }
}

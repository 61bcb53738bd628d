//! Summary statistics over the per-replication estimates of one method.

use crate::error::{Error, Result};

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn sample_sd(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "standard deviation needs at least 2 values, got {}",
            values.len()
        )));
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Ok((ss / (values.len() as f64 - 1.0)).sqrt())
}

/// `[mean − SD, mean + SD]`.
pub fn interval(values: &[f64]) -> Result<(f64, f64)> {
    let sd = sample_sd(values)?;
    let m = mean(values);
    Ok((m - sd, m + sd))
}

pub fn pooled_sd(large: &[f64], small: &[f64]) -> Result<f64> {
    let a = sample_sd(large)?;
    let b = sample_sd(small)?;
    Ok(((a * a + b * b) / 2.0).sqrt())
}

/// Standardised mean difference `(M_large − M_small) / SD_pooled`.
pub fn cohens_d(large: &[f64], small: &[f64]) -> Result<f64> {
    let pooled = pooled_sd(large, small)?;
    if pooled == 0.0 {
        return Err(Error::InvalidInput("pooled standard deviation is zero".into()));
    }
    Ok((mean(large) - mean(small)) / pooled)
}

/// Fraction of pairs whose larger-effect estimate strictly exceeds the
/// smaller-effect one; ties count as incorrect.
pub fn selection_accuracy(paired: &[(f64, f64)]) -> Result<f64> {
    if paired.is_empty() {
        return Err(Error::InvalidInput("selection accuracy needs at least one pair".into()));
    }
    let correct = paired.iter().filter(|(l, s)| l > s).count();
    Ok(correct as f64 / paired.len() as f64)
}

/// Aggregate metrics for one method over paired replications.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSummary {
    pub mean_large: f64,
    pub sd_large: f64,
    pub mean_small: f64,
    pub sd_small: f64,
    pub interval_large: (f64, f64),
    pub interval_small: (f64, f64),
    /// `None` when the pooled SD is zero.
    pub cohens_d: Option<f64>,
    pub accuracy: f64,
    pub n_effective: usize,
}

impl ComparisonSummary {
    /// Pairs with a missing (degenerate) estimate on either side are dropped.
    pub fn from_pairs(pairs: &[(Option<f64>, Option<f64>)]) -> Result<Self> {
        let complete: Vec<(f64, f64)> = pairs
            .iter()
            .filter_map(|p| match p {
                (Some(l), Some(s)) => Some((*l, *s)),
                _ => None,
            })
            .collect();
        let large: Vec<f64> = complete.iter().map(|p| p.0).collect();
        let small: Vec<f64> = complete.iter().map(|p| p.1).collect();
        Ok(Self {
            mean_large: mean(&large),
            sd_large: sample_sd(&large)?,
            mean_small: mean(&small),
            sd_small: sample_sd(&small)?,
            interval_large: interval(&large)?,
            interval_small: interval(&small)?,
            cohens_d: cohens_d(&large, &small).ok(),
            accuracy: selection_accuracy(&complete)?,
            n_effective: complete.len(),
        })
    }
}

//! Representational dissimilarity matrices and rank correlation.
//!
//! An [`Rdm`] stores only the strict lower triangle of the item-by-item
//! dissimilarity matrix, in the order `(1,0), (2,0), (2,1), (3,0), …`
//! (zero-based). The diagonal never enters a comparison.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Correlation,
    Euclidean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rdm {
    n_items: usize,
    values: Vec<f64>,
    metric: Metric,
}

pub fn condensed_len(n_items: usize) -> usize {
    n_items * n_items.saturating_sub(1) / 2
}

/// Position of the pair `(i, j)`, `i > j`, in the condensed vector.
pub fn condensed_index(i: usize, j: usize) -> usize {
    debug_assert!(i > j);
    i * (i - 1) / 2 + j
}

impl Rdm {
    pub fn from_condensed(n_items: usize, values: Vec<f64>, metric: Metric) -> Result<Self> {
        if values.len() != condensed_len(n_items) {
            return Err(Error::InvalidInput(format!(
                "condensed RDM for {n_items} items needs {} values, got {}",
                condensed_len(n_items),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput("dissimilarities must be finite and non-negative".into()));
        }
        Ok(Self {
            n_items,
            values,
            metric,
        })
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// Dissimilarity between items `i` and `j` of the implied full matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Greater => self.values[condensed_index(i, j)],
            std::cmp::Ordering::Less => self.values[condensed_index(j, i)],
        }
    }

    pub fn to_square(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_items, self.n_items, |i, j| self.get(i, j))
    }
}

/// `1 − Pearson(row_i, row_j)` for every pair of rows.
pub fn correlation_rdm(x: &DMatrix<f64>) -> Result<Rdm> {
    let (n, p) = x.shape();
    if p < 2 {
        return Err(Error::InvalidInput(format!(
            "correlation distance needs at least 2 features, got {p}"
        )));
    }
    // Row-centre and scale each row to unit length; the Gram matrix of the
    // result holds the row-wise Pearson correlations.
    let mut z = DMatrix::<f64>::zeros(p, n);
    for i in 0..n {
        let row = x.row(i);
        let mean = row.mean();
        let scale = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let ss: f64 = row.iter().map(|v| (v - mean) * (v - mean)).sum();
        let norm = ss.sqrt();
        if !norm.is_finite() || norm <= f64::EPSILON * scale * (p as f64).sqrt() || norm == 0.0 {
            return Err(Error::ConstantRow { row: i });
        }
        for k in 0..p {
            z[(k, i)] = (row[k] - mean) / norm;
        }
    }
    let gram = z.tr_mul(&z);
    let mut values = Vec::with_capacity(condensed_len(n));
    for i in 1..n {
        for j in 0..i {
            values.push((1.0 - gram[(i, j)]).clamp(0.0, 2.0));
        }
    }
    Ok(Rdm {
        n_items: n,
        values,
        metric: Metric::Correlation,
    })
}

/// Pairwise Euclidean distances between rows.
pub fn euclidean_rdm(y: &DMatrix<f64>) -> Result<Rdm> {
    let (n, q) = y.shape();
    if q == 0 {
        return Err(Error::InvalidInput("response needs at least one column".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("response contains non-finite values".into()));
    }
    if q == 1 {
        let col: Vec<f64> = y.column(0).iter().copied().collect();
        return euclidean_rdm_1d(&col);
    }
    // Row-major copy so each pair is a contiguous difference.
    let rows: Vec<f64> = (0..n).flat_map(|i| y.row(i).iter().copied().collect::<Vec<_>>()).collect();
    let mut values = Vec::with_capacity(condensed_len(n));
    for i in 1..n {
        let a = &rows[i * q..(i + 1) * q];
        for j in 0..i {
            let b = &rows[j * q..(j + 1) * q];
            let ss: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
            values.push(ss.sqrt());
        }
    }
    Ok(Rdm {
        n_items: n,
        values,
        metric: Metric::Euclidean,
    })
}

/// `|y_i − y_j|` for a single response column.
pub fn euclidean_rdm_1d(y: &[f64]) -> Result<Rdm> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("response contains non-finite values".into()));
    }
    let n = y.len();
    let mut values = Vec::with_capacity(condensed_len(n));
    for i in 1..n {
        for j in 0..i {
            values.push((y[i] - y[j]).abs());
        }
    }
    Ok(Rdm {
        n_items: n,
        values,
        metric: Metric::Euclidean,
    })
}

pub fn feature_rdm(x: &DMatrix<f64>, metric: Metric) -> Result<Rdm> {
    match metric {
        Metric::Correlation => correlation_rdm(x),
        Metric::Euclidean => euclidean_rdm(x),
    }
}

/// Order-preserving map from `f64` to `u64` (finite inputs; `-0.0` folded into `0.0`).
fn sort_key(v: f64) -> u64 {
    let bits = (v + 0.0).to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

/// Mid-ranks (1-based); tied values share the mean of their rank span.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut keyed: Vec<(u64, u32)> = v.iter().enumerate().map(|(i, &x)| (sort_key(x), i as u32)).collect();
    keyed.sort_unstable();
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < keyed.len() {
        let mut end = start + 1;
        while end < keyed.len() && keyed[end].0 == keyed[start].0 {
            end += 1;
        }
        // Ranks start+1 ..= end, mean (start + 1 + end) / 2.
        let r = (start + 1 + end) as f64 / 2.0;
        for &(_, idx) in &keyed[start..end] {
            ranks[idx as usize] = r;
        }
        start = end;
    }
    ranks
}

/// Sample Pearson correlation; `None` when either input has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman's rho as the Pearson correlation of mid-ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "spearman inputs differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "spearman needs at least 3 values, got {}",
            a.len()
        )));
    }
    let ra = RankVector::new(a)?;
    let rb = RankVector::new(b)?;
    Ok(ra.correlate(&rb))
}

/// Mean-centred mid-ranks with their Euclidean norm, ready for repeated
/// correlation against other rank vectors.
#[derive(Debug, Clone)]
pub struct RankVector {
    centered: Vec<f64>,
    norm: f64,
}

impl RankVector {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("rank input contains non-finite values".into()));
        }
        let ranks = average_ranks(values);
        let first = ranks.first().copied().unwrap_or(0.0);
        if ranks.iter().all(|&r| r == first) {
            return Err(Error::DegenerateRdm);
        }
        let m = ranks.len() as f64;
        // Mid-ranks always sum to m(m+1)/2.
        let mean = (m + 1.0) / 2.0;
        let centered: Vec<f64> = ranks.into_iter().map(|r| r - mean).collect();
        let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(Self { centered, norm })
    }

    pub fn len(&self) -> usize {
        self.centered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centered.is_empty()
    }

    pub fn correlate(&self, other: &RankVector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        let dot: f64 = self.centered.iter().zip(&other.centered).map(|(a, b)| a * b).sum();
        (dot / (self.norm * other.norm)).clamp(-1.0, 1.0)
    }
}

/// An RDM whose dissimilarities have already been ranked.
#[derive(Debug, Clone)]
pub struct RankedRdm {
    n_items: usize,
    ranks: RankVector,
}

impl RankedRdm {
    pub fn new(rdm: &Rdm) -> Result<Self> {
        if rdm.values.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "RSA needs at least 3 item pairs, got {}",
                rdm.values.len()
            )));
        }
        Ok(Self {
            n_items: rdm.n_items,
            ranks: RankVector::new(&rdm.values)?,
        })
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn rsa(&self, other: &RankedRdm) -> Result<f64> {
        if self.n_items != other.n_items {
            return Err(Error::RdmMismatch {
                left: self.n_items,
                right: other.n_items,
            });
        }
        Ok(self.ranks.correlate(&other.ranks))
    }
}

/// Spearman correlation between two RDMs over their condensed triangles.
pub fn rsa_score(rdm_x: &Rdm, rdm_y: &Rdm) -> Result<f64> {
    if rdm_x.n_items != rdm_y.n_items {
        return Err(Error::RdmMismatch {
            left: rdm_x.n_items,
            right: rdm_y.n_items,
        });
    }
    RankedRdm::new(rdm_x)?.rsa(&RankedRdm::new(rdm_y)?)
}

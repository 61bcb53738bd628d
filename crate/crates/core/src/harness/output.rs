//! Flat result rows, per-method summaries and their CSV encoding.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::methods::{Method, Outcome};
use crate::metrics::ComparisonSummary;

pub const RESULTS_HEADER: [&str; 12] = [
    "experiment",
    "condition_id",
    "n",
    "noise_var",
    "p",
    "rho_rel",
    "rho_irrel",
    "replication",
    "method",
    "model",
    "estimate",
    "status",
];

pub const SUMMARY_HEADER: [&str; 19] = [
    "experiment",
    "condition_id",
    "n",
    "noise_var",
    "p",
    "rho_rel",
    "rho_irrel",
    "method",
    "mean_large",
    "sd_large",
    "mean_small",
    "sd_small",
    "interval_lo_large",
    "interval_hi_large",
    "interval_lo_small",
    "interval_hi_small",
    "cohens_d",
    "accuracy",
    "n_effective",
];

pub const SIGNIFICANT_DIGITS: usize = 10;

/// Shortest `%g`-style rendering with [`SIGNIFICANT_DIGITS`] significant digits.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= SIGNIFICANT_DIGITS as i32 {
        let m = trim_zeros(mantissa);
        format!("{m}e{exp}")
    } else {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rounds to the value that [`format_sig`] would write.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format_sig(x).parse().expect("format_sig output parses")
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig).unwrap_or_else(|| "NA".into())
}

/// Columns identifying one condition, shared by result and summary rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionKey {
    pub experiment: String,
    pub condition_id: u64,
    pub n: usize,
    pub noise_var: Option<f64>,
    pub p: usize,
    pub rho_rel: Option<f64>,
    pub rho_irrel: Option<f64>,
}

impl ConditionKey {
    fn fields(&self) -> [String; 7] {
        [
            self.experiment.clone(),
            self.condition_id.to_string(),
            self.n.to_string(),
            opt(self.noise_var),
            self.p.to_string(),
            opt(self.rho_rel),
            opt(self.rho_irrel),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub condition: ConditionKey,
    pub replication: u64,
    pub method: Method,
    /// `large`/`small`, or a composite name.
    pub model: String,
    /// Position of the model in its pair; 0 is the model expected to win.
    pub model_index: usize,
    pub outcome: Outcome,
}

impl ResultRecord {
    pub fn estimate(&self) -> Option<f64> {
        self.outcome.estimate()
    }

    fn sort_key(&self) -> (u64, u64, Method, usize) {
        (self.condition.condition_id, self.replication, self.method, self.model_index)
    }
}

pub fn sort_records(records: &mut [ResultRecord]) {
    records.sort_by_key(ResultRecord::sort_key);
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub condition: ConditionKey,
    pub method: Method,
    /// `None` when fewer than two complete pairs remain.
    pub summary: Option<ComparisonSummary>,
    pub n_effective: usize,
}

/// Aggregates sorted records per condition and method, pairing model 0
/// against model 1 within each replication.
pub fn summarize(records: &[ResultRecord]) -> Vec<SummaryRow> {
    let mut groups: Vec<(ConditionKey, Method, Vec<(u64, usize, Option<f64>)>)> = Vec::new();
    let mut order: Vec<&ResultRecord> = records.iter().collect();
    order.sort_by(|a, b| {
        (a.condition.condition_id, a.method, a.replication, a.model_index).cmp(&(
            b.condition.condition_id,
            b.method,
            b.replication,
            b.model_index,
        ))
    });
    for r in order {
        match groups.last_mut() {
            Some((c, m, v)) if c.condition_id == r.condition.condition_id && *m == r.method => {
                v.push((r.replication, r.model_index, r.estimate()));
            }
            _ => groups.push((r.condition.clone(), r.method, vec![(r.replication, r.model_index, r.estimate())])),
        }
    }

    groups
        .into_iter()
        .map(|(condition, method, rows)| {
            let mut pairs = Vec::new();
            let mut i = 0;
            while i < rows.len() {
                let rep = rows[i].0;
                let mut large = None;
                let mut small = None;
                let mut seen = (false, false);
                while i < rows.len() && rows[i].0 == rep {
                    match rows[i].1 {
                        0 => {
                            large = rows[i].2;
                            seen.0 = true;
                        }
                        1 => {
                            small = rows[i].2;
                            seen.1 = true;
                        }
                        _ => {}
                    }
                    i += 1;
                }
                if seen.0 && seen.1 {
                    pairs.push((large, small));
                }
            }
            let n_effective = pairs.iter().filter(|(l, s)| l.is_some() && s.is_some()).count();
            SummaryRow {
                condition,
                method,
                summary: ComparisonSummary::from_pairs(&pairs).ok(),
                n_effective,
            }
        })
        .collect()
}

pub fn write_results<W: Write>(out: W, records: &[ResultRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in records {
        let mut row: Vec<String> = r.condition.fields().to_vec();
        row.push(r.replication.to_string());
        row.push(r.method.as_str().to_string());
        row.push(r.model.clone());
        row.push(opt(r.estimate()));
        row.push(r.outcome.status().to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        let mut row: Vec<String> = r.condition.fields().to_vec();
        row.push(r.method.as_str().to_string());
        let s = r.summary.as_ref();
        row.push(opt(s.map(|s| s.mean_large)));
        row.push(opt(s.map(|s| s.sd_large)));
        row.push(opt(s.map(|s| s.mean_small)));
        row.push(opt(s.map(|s| s.sd_small)));
        row.push(opt(s.map(|s| s.interval_large.0)));
        row.push(opt(s.map(|s| s.interval_large.1)));
        row.push(opt(s.map(|s| s.interval_small.0)));
        row.push(opt(s.map(|s| s.interval_small.1)));
        row.push(opt(s.and_then(|s| s.cohens_d)));
        row.push(opt(s.map(|s| s.accuracy)));
        row.push(r.n_effective.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

/// Writes `results.csv` and `summary.csv` into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, records: &[ResultRecord], summary: &[SummaryRow]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(RESULTS_FILE);
    let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_results(std::io::BufWriter::new(f), records)?;
    let path = dir.join(SUMMARY_FILE);
    let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_summary(std::io::BufWriter::new(f), summary)?;
    Ok(())
}

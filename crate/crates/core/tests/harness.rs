use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rsacmp::harness::{run_experiment, run_to_dir, Experiment, ExperimentConfig, RESULTS_HEADER, SUMMARY_HEADER};
use rsacmp::Method;

fn small(experiment: Experiment, reps: usize, methods: &[Method]) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(experiment);
    cfg.replications = reps;
    cfg.base_seed = 7;
    cfg.methods = Some(methods.to_vec());
    cfg
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn row_count_and_uniqueness() {
    let cfg = small(Experiment::SimA, 25, &[Method::Ols, Method::Rsa]);
    let dir = tempfile::tempdir().unwrap();
    run_to_dir(&cfg, dir.path()).unwrap();
    let (header, rows) = read_csv(&dir.path().join("results.csv"));
    assert_eq!(header, RESULTS_HEADER);
    assert_eq!(rows.len(), 5 * 25 * 2 * 2);
    let keys: BTreeSet<(String, String, String, String)> =
        rows.iter().map(|r| (r[1].clone(), r[7].clone(), r[8].clone(), r[9].clone())).collect();
    assert_eq!(keys.len(), rows.len());
    assert!(rows.iter().all(|r| r[0] == "sim_a" && r[11] == "ok"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cfg = small(Experiment::SimD, 6, &[Method::Rsa, Method::PcaRsa, Method::FrRsa, Method::Ols]);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_to_dir(&cfg, a.path()).unwrap();
    let mut cfg2 = cfg.clone();
    cfg2.workers = Some(3);
    run_to_dir(&cfg2, b.path()).unwrap();
    for f in ["results.csv", "summary.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

fn parse(s: &str) -> Option<f64> {
    if s == "NA" {
        None
    } else {
        Some(s.parse().unwrap())
    }
}

/// Recomputes every summary column from results.csv alone.
#[test]
fn summary_recomputable_from_results() {
    let cfg = small(Experiment::SimB, 30, &[Method::Ols, Method::Rsa]);
    let dir = tempfile::tempdir().unwrap();
    run_to_dir(&cfg, dir.path()).unwrap();
    let (_, results) = read_csv(&dir.path().join("results.csv"));
    let (header, summary) = read_csv(&dir.path().join("summary.csv"));
    assert_eq!(header, SUMMARY_HEADER);

    // (condition, method) -> replication -> (large, small)
    let mut groups: BTreeMap<(u64, String), BTreeMap<u64, (Option<f64>, Option<f64>)>> = BTreeMap::new();
    for r in &results {
        let entry = groups
            .entry((r[1].parse().unwrap(), r[8].clone()))
            .or_default()
            .entry(r[7].parse().unwrap())
            .or_default();
        match r[9].as_str() {
            "large" => entry.0 = parse(&r[10]),
            "small" => entry.1 = parse(&r[10]),
            m => panic!("unexpected model {m}"),
        }
    }
    assert_eq!(summary.len(), groups.len());
    for row in &summary {
        let pairs: Vec<(f64, f64)> = groups[&(row[1].parse().unwrap(), row[7].clone())]
            .values()
            .filter_map(|&(l, s)| Some((l?, s?)))
            .collect();
        let n = pairs.len() as f64;
        let mean = |f: fn(&(f64, f64)) -> f64| pairs.iter().map(f).sum::<f64>() / n;
        let sd = |f: fn(&(f64, f64)) -> f64, m: f64| (pairs.iter().map(|p| (f(p) - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let ml = mean(|p| p.0);
        let ms = mean(|p| p.1);
        let sl = sd(|p| p.0, ml);
        let ss = sd(|p| p.1, ms);
        let d = (ml - ms) / ((sl * sl + ss * ss) / 2.0).sqrt();
        let accuracy = pairs.iter().filter(|p| p.0 > p.1).count() as f64 / n;
        let expected = [ml, sl, ms, ss, ml - sl, ml + sl, ms - ss, ms + ss, d, accuracy];
        for (k, e) in expected.iter().enumerate() {
            let got: f64 = row[8 + k].parse().unwrap();
            // Written values carry 10 significant digits.
            assert!((got - e).abs() <= 1e-10 + 5e-10 * e.abs(), "{}: {got} vs {e}", SUMMARY_HEADER[8 + k]);
        }
        assert_eq!(row[18].parse::<usize>().unwrap(), pairs.len());
    }
}

#[test]
fn regression_beats_rsa_at_largest_sample() {
    let mut cfg = small(Experiment::SimA, 200, &[Method::Ols, Method::Rsa]);
    cfg.n_levels = Some(vec![500]);
    let out = run_experiment(&cfg).unwrap();
    let acc = |m: Method| out.summary.iter().find(|r| r.method == m).unwrap().summary.as_ref().unwrap().accuracy;
    assert!(acc(Method::Ols) > acc(Method::Rsa));
}

#[test]
fn voxel_experiment_runs() {
    let mut cfg = small(Experiment::Fmri, 4, &[Method::Lmm, Method::Rsa, Method::FrRsa]);
    cfg.n_levels = Some(vec![40]);
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.records.len(), 3 * 4 * 3 * 2);
    for r in &out.records {
        let v = r.estimate().unwrap();
        match r.method {
            Method::Lmm => assert!((0.0..=1.0).contains(&v)),
            _ => assert!((-1.0..=1.0).contains(&v)),
        }
    }
}

#[test]
fn invalid_configs_rejected() {
    assert!(run_experiment(&small(Experiment::SimA, 3, &[Method::Lmm])).is_err());
    assert!(run_experiment(&small(Experiment::Fmri, 3, &[Method::Ols])).is_err());
    assert!(run_experiment(&small(Experiment::SimA, 0, &[Method::Rsa])).is_err());
    let mut custom = small(Experiment::Custom, 3, &[Method::Lmm, Method::Rsa]);
    custom.n_levels = Some(vec![30]);
    assert!(run_experiment(&custom).is_err());
    custom.voxel = true;
    custom.grid_size = Some(5);
    assert_eq!(run_experiment(&custom).unwrap().records.len(), 3 * 2 * 2);
}

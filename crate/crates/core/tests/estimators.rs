mod common;

use fgd_core::harness::{run_experiment, run_replicates, EstimatorId, ExperimentSpec, Preset, SummaryTable};

fn spec(hurst: &[f64], sigma: f64, n: &[usize], estimators: &[&str], replicates: usize, seed: u64) -> ExperimentSpec {
    ExperimentSpec {
        hurst: hurst.to_vec(),
        sigma: vec![sigma],
        n: n.to_vec(),
        replicates,
        seed,
        estimators: estimators.iter().map(|e| e.parse().unwrap()).collect(),
        ..Preset::Fig1.spec()
    }
}

fn mean_estimate(table: &SummaryTable, id: &str, h: f64, sigma: f64, n: usize) -> f64 {
    let row = table.row(id, h, sigma, n).unwrap();
    assert_eq!(row.fail_count, 0, "{id}");
    let truth = if id.starts_with('h') { h } else { sigma };
    truth * (1.0 + row.mean_rel_err)
}

#[test]
fn hurst_estimators_center_on_truth() {
    let t = run_experiment(&spec(&[0.75], 1.5, &[1024], &["h1", "h3"], 300, 21)).unwrap();
    for id in ["h1", "h3"] {
        let m = mean_estimate(&t, id, 0.75, 1.5, 1024);
        assert!((m - 0.75).abs() <= 0.05, "{id}: {m}");
    }
    let t = run_experiment(&spec(&[0.75], 1.5, &[4096], &["h2"], 300, 22)).unwrap();
    let m = mean_estimate(&t, "h2", 0.75, 1.5, 4096);
    assert!((m - 0.75).abs() <= 0.08, "h2: {m}");
    let t = run_experiment(&spec(&[0.75], 1.5, &[2401], &["h4"], 300, 23)).unwrap();
    let m = mean_estimate(&t, "h4", 0.75, 1.5, 2401);
    assert!((m - 0.75).abs() <= 0.12, "h4: {m}");
}

#[test]
fn hurst_error_does_not_grow_with_budget() {
    let cases: [(&str, [usize; 2]); 4] =
        [("h1", [256, 1024]), ("h3", [256, 1024]), ("h2", [1024, 4096]), ("h4", [600, 2401])];
    for (id, sizes) in cases {
        let t = run_experiment(&spec(&[0.75], 1.5, &sizes, &[id], 150, 31)).unwrap();
        let small = t.row(id, 0.75, 1.5, sizes[0]).unwrap();
        let large = t.row(id, 0.75, 1.5, sizes[1]).unwrap();
        let noise = 2.0 * small.se_abs.hypot(large.se_abs);
        assert!(large.mean_abs_err <= small.mean_abs_err + noise, "{id}: {} vs {}", large.mean_abs_err, small.mean_abs_err);
    }
}

#[test]
fn diffusion_estimators_with_estimated_hurst() {
    let ids = ["s1_h3", "s2_h3", "s3_h3", "s4"];
    let t = run_experiment(&spec(&[0.75], 1.5, &[1024], &ids, 300, 41)).unwrap();
    for id in &ids[..3] {
        let rel = t.row(id, 0.75, 1.5, 1024).unwrap().mean_rel_err;
        assert!(rel.abs() <= 0.15, "{id}: {rel}");
    }
    let s4 = mean_estimate(&t, "s4", 0.75, 1.5, 1024);
    assert!((s4 - 1.5).abs() <= 0.2 * 1.5, "s4: {s4}");

    let t = run_experiment(&spec(&[0.75], 1.0, &[1024], &ids[..3], 300, 42)).unwrap();
    for id in &ids[..3] {
        let rel = t.row(id, 0.75, 1.0, 1024).unwrap().mean_rel_err;
        assert!((-0.2..=0.2).contains(&rel), "{id} at sigma 1: {rel}");
    }
}

#[test]
fn sigma3_with_true_hurst_recovers_variance() {
    let s = spec(&[0.75], 1.5, &[4096], &["s3_true"], 300, 43);
    let raw = run_replicates(&s).unwrap();
    let id: EstimatorId = "s3_true".parse().unwrap();
    let sq: Vec<f64> = raw.estimates(0, id).iter().map(|v| v.estimate * v.estimate).collect();
    let (mean, _) = common::mean_se(&sq);
    assert!((mean - 2.25).abs() <= 0.1 * 2.25, "{mean}");
}

#[test]
fn ratio_estimator_trails_first_estimator() {
    let hs = [0.6, 0.75, 0.9];
    let t = run_experiment(&spec(&hs, 1.5, &[1024], &["h1", "h4"], 300, 51)).unwrap();
    let worse = hs
        .iter()
        .filter(|&&h| t.row("h4", h, 1.5, 1024).unwrap().mean_abs_err >= t.row("h1", h, 1.5, 1024).unwrap().mean_abs_err)
        .count();
    assert!(worse >= 2, "h4 worse in {worse} of 3 cells");
}

use twoparty::harness::{fit_exponent, run_sweep, sign_test_at, summary_json, write_csv, ExperimentConfig};
use twoparty_core::density::Mode;

#[test]
fn one_point_one_trial_is_reproducible() {
    let mut c = ExperimentConfig::new(vec![16384.0], 1, 1.0, 1, 3);
    c.modes = vec![Mode::Interactive];
    let a = run_sweep(&c).unwrap();
    let b = run_sweep(&c).unwrap();
    assert_eq!(a.records.len(), 1);
    assert_eq!(a.records, b.records);
    let r = &a.records[0];
    assert_eq!(r.squared_error, (r.p_hat - r.truth).powi(2));
    assert!(r.wall_time.is_none());
    assert_eq!(summary_json(&a).unwrap(), summary_json(&b).unwrap());
}

#[test]
fn infeasible_points_become_skipped_rows() {
    let c = ExperimentConfig::new(vec![4096.0, 16384.0], 1, 1.0, 2, 1);
    let res = run_sweep(&c).unwrap();
    assert_eq!(res.skipped.len(), 1);
    assert_eq!((res.skipped[0].k, res.skipped[0].mode), (4096.0, "oneway"));
    assert_eq!(res.summaries.len(), 3);
    assert_eq!(res.records.len(), 6);
    let keys: Vec<(f64, Mode, usize)> = res.records.iter().map(|r| (r.k, r.mode, r.trial)).collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(keys, sorted);
    let json: serde_json::Value = serde_json::from_str(&summary_json(&res).unwrap()).unwrap();
    assert_eq!(json["skipped"][0]["mode"], "oneway");
    assert_eq!(json["points"].as_array().unwrap().len(), 3);
}

#[test]
fn summaries_track_bits_and_bounds() {
    let c = ExperimentConfig::new(vec![65536.0], 1, 1.0, 4, 8);
    let res = run_sweep(&c).unwrap();
    for s in &res.summaries {
        assert!(s.mean_bits <= s.k && s.within_budget);
        assert!(s.comm_compliant, "{s:?}");
        assert!(s.delta_binarized > 0.0 && s.delta_binarized < 0.1);
        assert!(s.median_squared_error <= s.mean_squared_error * 4.0);
    }
    let t = sign_test_at(&res.records, 65536.0).unwrap();
    assert_eq!(t.interactive_wins + t.one_way_wins + t.ties, 4);
    assert!(sign_test_at(&res.records, 1024.0).is_none());
}

#[test]
fn timing_adds_a_column() {
    let mut c = ExperimentConfig::new(vec![16384.0], 1, 1.0, 1, 0);
    c.modes = vec![Mode::Interactive];
    c.timing = true;
    let res = run_sweep(&c).unwrap();
    let mut buf = Vec::new();
    write_csv(&res.records, true, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.lines().next().unwrap().ends_with(",wall_time"));
    assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 14);
}

#[test]
fn slope_of_a_noisy_power_law() {
    let pts: Vec<(f64, f64)> = (10..=18)
        .map(|e| {
            let k = f64::powi(2.0, e);
            (k, 5.0 * k.powf(-2.0 / 3.0) * if e % 2 == 0 { 1.05 } else { 0.95 })
        })
        .collect();
    let f = fit_exponent(&pts).unwrap();
    assert!((f.slope + 2.0 / 3.0).abs() < 0.02);
    assert!(f.stderr > 0.0);
}

use std::path::Path;
use std::process::{Command, Output};

use twoparty::io::{read_transcript, write_samples};

fn twoparty(args: &[&str], dir: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_twoparty")).args(args).current_dir(dir).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn value(out: &Output, key: &str) -> String {
    let text = String::from_utf8_lossy(&out.stdout);
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
        .to_string()
}

#[test]
fn sweep_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sweep", "--k-grid", "2^14,2^15", "--trials", "2", "--seed", "11"];
    twoparty(&[&args[..], &["--out", "a.csv"]].concat(), dir.path());
    twoparty(&[&args[..], &["--out", "b.csv"]].concat(), dir.path());
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    assert_eq!(std::fs::read(dir.path().join("a.json")).unwrap(), std::fs::read(dir.path().join("b.json")).unwrap());
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "k,mode,trial,seed,m1,m2,n,r,bits_used,delta_hat,p_hat,truth,squared_error");
    // Two modes, two budgets, two trials each, sorted by (k, mode, trial).
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8);
    assert_eq!((rows[0][0], rows[0][1], rows[0][2]), ("16384", "oneway", "0"));
    assert_eq!((rows[3][0], rows[3][1], rows[3][2]), ("16384", "interactive", "1"));
    assert_eq!(rows[0][3], rows[2][3], "paired trials share the sample seed");
    for r in &rows {
        let p: f64 = r[10].parse().unwrap();
        let t: f64 = r[11].parse().unwrap();
        let se: f64 = r[12].parse().unwrap();
        assert_eq!(se, (p - t).powi(2));
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "m1 = 20\ndelta = 0.5\nn = 3000\nseed = 4\n").unwrap();
    let a = twoparty(&["bernoulli", "--config", "run.toml"], dir.path());
    let b = twoparty(&["bernoulli", "--config", "run.toml", "--seed", "4"], dir.path());
    let c = twoparty(&["bernoulli", "--config", "run.toml", "--seed", "5"], dir.path());
    assert_eq!(value(&a, "delta_hat"), value(&b, "delta_hat"));
    assert_ne!(value(&a, "delta_hat"), value(&c, "delta_hat"));
}

#[test]
fn bernoulli_writes_a_decodable_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let out = twoparty(
        &["bernoulli", "--m1", "100", "--delta", "1", "--n", "5000", "--mode", "interactive", "--out", "t.bin"],
        dir.path(),
    );
    let t = read_transcript(&dir.path().join("t.bin")).unwrap();
    assert_eq!(t.rounds(), 4);
    assert_eq!(t.n(), 5000);
    assert_eq!(t.bit_count().to_string(), value(&out, "bits"));
}

#[test]
fn density_reads_a_sample_file() {
    let dir = tempfile::tempdir().unwrap();
    // Independent uniform pairs on a regular grid: the estimate should sit
    // near the true density 1.
    let n: usize = 400_000;
    let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let ys: Vec<f64> = (0..n).map(|i| ((i * 7919) % n) as f64 / n as f64 + 0.5 / n as f64).collect();
    write_samples(&dir.path().join("s.bin"), &xs, &ys, 1).unwrap();
    let out = twoparty(&["density", "--k", "2^16", "--mode", "oneway", "--samples", "s.bin"], dir.path());
    let p: f64 = value(&out, "p_hat").parse().unwrap();
    assert!((p - 1.0).abs() < 0.5, "{p}");
    let bits: f64 = value(&out, "bits_used").parse().unwrap();
    assert!(bits <= 65536.0);
}

#[test]
fn small_commands_print_expected_values() {
    let dir = tempfile::tempdir().unwrap();
    let k = twoparty(&["kernel", "--order", "2"], dir.path());
    let c1: f64 = value(&k, "c1").parse().unwrap();
    assert!((c1 - 2.0 / 3.0).abs() < 1e-12);
    let s = twoparty(&["schedule", "--m1", "100"], dir.path());
    assert_eq!(value(&s, "rounds"), "4");
    let d = twoparty(&["dpi", "--m1", "100", "--delta", "0.5"], dir.path());
    let row = String::from_utf8_lossy(&d.stdout).lines().nth(1).unwrap().to_string();
    let cols: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
    assert!(cols[2] <= cols[3] * (1.0 + 1e-6));
    assert!((cols[4] - 0.5 / 99.0).abs() < 1e-10);
}

#[test]
fn selftest_runs_selected_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let out = twoparty(&["selftest", "--only", "8,10"], dir.path());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("PASS [ 8]"));
    assert!(text.contains("PASS [10]"));
    assert!(text.contains("2 passed, 0 failed"));
}

#[test]
fn bad_input_is_an_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_twoparty"))
        .args(["sweep", "--k-grid", "2^15,2^14", "--trials", "1"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("strictly increasing"));
}

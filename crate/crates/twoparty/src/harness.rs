//! Seeded Monte Carlo sweeps of the density estimator over a grid of bit
//! budgets.
//!
//! Every grid point uses the benchmark test density for its `k`, shared by
//! both modes, and trial `t` draws its samples from the same derived seed in
//! either mode, so one-way and interactive errors come in pairs.

use std::io::Write;
use std::time::Instant;

use anyhow::{bail, Result};
use rayon::prelude::*;
use serde::Serialize;
use twoparty_core::density::{estimate_density, plan, DensityConfig, Mode, Plan, TestDensity};
use twoparty_core::estimator::SEED_DOMAIN_SAMPLES;
use twoparty_core::randomness::{derive_seed, SearchPolicy};
use twoparty_core::schedule::{
    one_way_comm_bound_bits, one_way_mse_bound, tetration_comm_bound_bits, tetration_mse_bound,
};

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub modes: Vec<Mode>,
    pub k_grid: Vec<f64>,
    pub d: usize,
    pub beta: f64,
    pub trials: usize,
    pub seed: u64,
    pub clamp: bool,
    pub delta_max: f64,
    /// Adds a `wall_time` column. Off by default so outputs stay
    /// byte-identical.
    pub timing: bool,
    pub policy: SearchPolicy,
}

impl ExperimentConfig {
    pub fn new(k_grid: Vec<f64>, d: usize, beta: f64, trials: usize, seed: u64) -> Self {
        ExperimentConfig {
            modes: vec![Mode::OneWay, Mode::Interactive],
            k_grid,
            d,
            beta,
            trials,
            seed,
            clamp: false,
            delta_max: 1.0,
            timing: false,
            policy: SearchPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.modes.is_empty() {
            bail!("no modes selected");
        }
        if self.k_grid.is_empty() {
            bail!("empty k grid");
        }
        if self.k_grid.windows(2).any(|w| !(w[0] < w[1])) {
            bail!("k grid must be strictly increasing");
        }
        if self.d == 0 || !(self.beta > 0.0) {
            bail!("need d >= 1 and beta > 0");
        }
        Ok(())
    }

    fn density_config(&self, k: f64, mode: Mode) -> DensityConfig {
        let mut c = DensityConfig::new(self.d, self.beta, k, mode);
        c.delta_max = self.delta_max;
        c.clamp = self.clamp;
        c
    }
}

/// One trial. `squared_error = (p_hat - truth)^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub k: f64,
    pub mode: Mode,
    pub trial: usize,
    /// The derived seed of the trial's samples, equal across modes.
    pub seed: u64,
    pub m1: f64,
    pub m2: f64,
    pub n: usize,
    pub r: usize,
    pub bits_used: usize,
    pub delta_hat: f64,
    pub p_hat: f64,
    pub truth: f64,
    pub squared_error: f64,
    pub wall_time: Option<f64>,
}

pub const CSV_COLUMNS: [&str; 13] =
    ["k", "mode", "trial", "seed", "m1", "m2", "n", "r", "bits_used", "delta_hat", "p_hat", "truth", "squared_error"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointSummary {
    pub k: f64,
    pub mode: &'static str,
    pub trials: usize,
    pub m: f64,
    pub m1: f64,
    pub m2: f64,
    pub n: usize,
    pub r: usize,
    pub truth: f64,
    pub smoothed_truth: f64,
    pub mean_squared_error: f64,
    pub median_squared_error: f64,
    pub mse_std_err: f64,
    pub mean_bits: f64,
    pub max_bits: usize,
    /// `delta` of the binarized law of the first box pair.
    pub delta_binarized: f64,
    pub comm_bound_bits: f64,
    /// Mean bits within the communication bound.
    pub comm_compliant: bool,
    /// Fraction of single trials above the (expected-value) bound.
    pub comm_trial_excess_fraction: f64,
    pub delta_mse: f64,
    pub delta_mse_bound: f64,
    /// Mean squared error of `delta_hat` within the MSE bound.
    pub mse_compliant: bool,
    pub within_budget: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SkippedPoint {
    pub k: f64,
    pub mode: &'static str,
    pub reason: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SignTest {
    pub k: f64,
    /// Trials where interactive had the smaller squared error.
    pub interactive_wins: usize,
    pub one_way_wins: usize,
    pub ties: usize,
    /// One-sided binomial p-value for "interactive wins more often".
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeAnalysis {
    pub mode: &'static str,
    pub fit: Option<ExponentFit>,
    pub target_slope: f64,
    /// `max/min` of `MSE * rate^{-1}` over the feasible grid.
    pub flatness_ratio: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<PointSummary>,
    pub skipped: Vec<SkippedPoint>,
    pub analyses: Vec<ModeAnalysis>,
    pub sign_test: Option<SignTest>,
}

struct Point {
    k: f64,
    mode: Mode,
    td: TestDensity,
    plan: Plan,
}

/// Runs every (k, mode, trial) in parallel; records come back sorted by
/// `(k, mode, trial)`.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let mut modes = config.modes.clone();
    modes.sort();
    modes.dedup();
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for &k in &config.k_grid {
        let td = match TestDensity::benchmark(k, config.d, config.beta) {
            Ok(td) => td,
            Err(e) => {
                for &mode in &modes {
                    skipped.push(SkippedPoint { k, mode: mode.name(), reason: e.to_string() });
                }
                continue;
            }
        };
        for &mode in &modes {
            match plan(&config.density_config(k, mode)) {
                Ok(p) => points.push(Point { k, mode, td: td.clone(), plan: p }),
                Err(e) => skipped.push(SkippedPoint { k, mode: mode.name(), reason: e.to_string() }),
            }
        }
    }

    let work: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..config.trials).map(move |t| (p, t))).collect();
    let records = work.par_iter().map(|&(p, t)| run_trial(&points[p], t, config)).collect::<Result<Vec<_>>>()?;

    let summaries: Vec<PointSummary> = points
        .iter()
        .enumerate()
        .map(|(i, p)| summarize(p, &records[i * config.trials..(i + 1) * config.trials]))
        .collect();
    let analyses = modes.iter().map(|&m| analyze_mode(m, &summaries, config)).collect();
    let sign_test = sign_test_at(&records, 65536.0);
    Ok(SweepResult { config: config.clone(), records, summaries, skipped, analyses, sign_test })
}

fn run_trial(point: &Point, trial: usize, config: &ExperimentConfig) -> Result<TrialRecord> {
    let start = Instant::now();
    let est = estimate_density(&point.plan, &point.td, config.seed, trial as u64, config.policy)?;
    let elapsed = start.elapsed().as_secs_f64();
    let first = &point.plan.subplans[0];
    let truth = point.td.truth();
    Ok(TrialRecord {
        k: point.k,
        mode: point.mode,
        trial,
        seed: derive_seed(config.seed, SEED_DOMAIN_SAMPLES, trial as u64),
        m1: first.m1,
        m2: first.m2,
        n: first.n,
        r: first.schedule.rounds(),
        bits_used: est.bits_used,
        delta_hat: est.delta_hat(),
        p_hat: est.p_hat,
        truth,
        squared_error: (est.p_hat - truth).powi(2),
        wall_time: config.timing.then_some(elapsed),
    })
}

fn summarize(point: &Point, records: &[TrialRecord]) -> PointSummary {
    let sub = &point.plan.subplans[0];
    let (m1, m2, n, r) = (sub.m1, sub.m2, sub.n, sub.schedule.rounds());
    let delta_bin = point.td.box_probability(&sub.x_map, &sub.y_map) * m1 * m2 - 1.0;
    let sessions = point.plan.subplans.len() as f64;
    let (comm_bound, mse_bound) = match point.mode {
        Mode::OneWay => (one_way_comm_bound_bits(n, m1, delta_bin), one_way_mse_bound(n, m1, m2, delta_bin)),
        Mode::Interactive => {
            (tetration_comm_bound_bits(n, m1, m2, delta_bin, r), tetration_mse_bound(n, m1, m2, delta_bin))
        }
    };
    let t = records.len() as f64;
    let se: Vec<f64> = records.iter().map(|r| r.squared_error).collect();
    let mse = se.iter().sum::<f64>() / t;
    let mse_sd =
        if records.len() > 1 { (se.iter().map(|x| (x - mse).powi(2)).sum::<f64>() / (t - 1.0)).sqrt() } else { 0.0 };
    // With several box pairs the first pair's bound is compared against the
    // per-session mean.
    let mean_bits = records.iter().map(|r| r.bits_used as f64).sum::<f64>() / t;
    let per_session_bits = mean_bits / sessions;
    let excess = records.iter().filter(|r| r.bits_used as f64 / sessions > comm_bound).count();
    let delta_mse = records.iter().map(|r| (r.delta_hat - delta_bin).powi(2)).sum::<f64>() / t;
    PointSummary {
        k: point.k,
        mode: point.mode.name(),
        trials: records.len(),
        m: point.plan.m,
        m1,
        m2,
        n,
        r,
        truth: point.td.truth(),
        smoothed_truth: point.td.smoothed_truth(&point.plan),
        mean_squared_error: mse,
        median_squared_error: median(&se),
        mse_std_err: mse_sd / t.sqrt(),
        mean_bits,
        max_bits: records.iter().map(|r| r.bits_used).max().unwrap_or(0),
        delta_binarized: delta_bin,
        comm_bound_bits: comm_bound,
        comm_compliant: per_session_bits <= comm_bound,
        comm_trial_excess_fraction: excess as f64 / t,
        delta_mse,
        delta_mse_bound: mse_bound,
        mse_compliant: delta_mse <= mse_bound,
        within_budget: mean_bits <= point.k,
    }
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}

/// `2 beta / (d + 2 beta)`.
pub fn rate_exponent(d: usize, beta: f64) -> f64 {
    2.0 * beta / (d as f64 + 2.0 * beta)
}

fn analyze_mode(mode: Mode, summaries: &[PointSummary], config: &ExperimentConfig) -> ModeAnalysis {
    let pts: Vec<(f64, f64)> =
        summaries.iter().filter(|s| s.mode == mode.name()).map(|s| (s.k, s.mean_squared_error)).collect();
    let e = rate_exponent(config.d, config.beta);
    ModeAnalysis {
        mode: mode.name(),
        fit: fit_exponent(&pts).ok(),
        target_slope: -e,
        flatness_ratio: flatness_ratio(&pts, e, mode == Mode::OneWay),
    }
}

/// Ordinary least squares of `ln mse` on `ln k`.
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<ExponentFit> {
    if points.len() < 3 {
        bail!("need at least 3 grid points, got {}", points.len());
    }
    if points.iter().any(|&(k, e)| !(k > 0.0 && e > 0.0 && k.is_finite() && e.is_finite())) {
        bail!("k and mse must be positive and finite");
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        bail!("degenerate k grid");
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(ExponentFit { slope, intercept, stderr })
}

/// `max/min` of `mse * g(k)^e` with `g(k) = k / ln k` (`log_factor`) or `k`.
/// `None` with fewer than two points.
pub fn flatness_ratio(points: &[(f64, f64)], e: f64, log_factor: bool) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let scaled: Vec<f64> = points
        .iter()
        .map(|&(k, mse)| {
            let g = if log_factor { k / k.ln() } else { k };
            mse * g.powf(e)
        })
        .collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    Some(max / min)
}

/// `P(Bin(n, 1/2) >= wins)`.
pub fn binomial_upper_tail(wins: usize, n: usize) -> f64 {
    if wins == 0 {
        return 1.0;
    }
    let ln_half_n = -(n as f64) * std::f64::consts::LN_2;
    let mut ln_c = 0.0;
    let mut terms = Vec::with_capacity(n + 1);
    for j in 0..=n {
        if j > 0 {
            ln_c += ((n - j + 1) as f64).ln() - (j as f64).ln();
        }
        if j >= wins {
            terms.push(ln_c + ln_half_n);
        }
    }
    terms.iter().map(|t| t.exp()).sum::<f64>().min(1.0)
}

/// Paired sign test of interactive against one-way squared errors at `k`.
pub fn sign_test_at(records: &[TrialRecord], k: f64) -> Option<SignTest> {
    let at = |mode: Mode| -> Vec<&TrialRecord> { records.iter().filter(|r| r.k == k && r.mode == mode).collect() };
    let (ow, it) = (at(Mode::OneWay), at(Mode::Interactive));
    if ow.is_empty() || ow.len() != it.len() {
        return None;
    }
    let (mut iw, mut ow_wins, mut ties) = (0, 0, 0);
    for (a, b) in ow.iter().zip(&it) {
        debug_assert_eq!(a.trial, b.trial);
        match b.squared_error.total_cmp(&a.squared_error) {
            std::cmp::Ordering::Less => iw += 1,
            std::cmp::Ordering::Greater => ow_wins += 1,
            std::cmp::Ordering::Equal => ties += 1,
        }
    }
    Some(SignTest {
        k,
        interactive_wins: iw,
        one_way_wins: ow_wins,
        ties,
        p_value: binomial_upper_tail(iw, iw + ow_wins),
    })
}

/// Writes the records as CSV in [`CSV_COLUMNS`] order, plus `wall_time`
/// when `timing` is set.
pub fn write_csv<W: Write>(records: &[TrialRecord], timing: bool, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = CSV_COLUMNS.to_vec();
    if timing {
        header.push("wall_time");
    }
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.k.to_string(),
            r.mode.name().to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.m1.to_string(),
            r.m2.to_string(),
            r.n.to_string(),
            r.r.to_string(),
            r.bits_used.to_string(),
            r.delta_hat.to_string(),
            r.p_hat.to_string(),
            r.truth.to_string(),
            r.squared_error.to_string(),
        ];
        if timing {
            row.push(r.wall_time.map_or_else(String::new, |t| t.to_string()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    modes: Vec<&'static str>,
    k_grid: &'a [f64],
    d: usize,
    beta: f64,
    trials: usize,
    seed: u64,
    clamp: bool,
    delta_max: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    config: ConfigEcho<'a>,
    points: &'a [PointSummary],
    skipped: &'a [SkippedPoint],
    analyses: &'a [ModeAnalysis],
    sign_test: Option<SignTest>,
}

/// The JSON summary document.
pub fn summary_json(result: &SweepResult) -> Result<String> {
    let c = &result.config;
    let doc = Summary {
        config: ConfigEcho {
            modes: c.modes.iter().map(|m| m.name()).collect(),
            k_grid: &c.k_grid,
            d: c.d,
            beta: c.beta,
            trials: c.trials,
            seed: c.seed,
            clamp: c.clamp,
            delta_max: c.delta_max,
        },
        points: &result.summaries,
        skipped: &result.skipped,
        analyses: &result.analyses,
        sign_test: result.sign_test,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let pts: Vec<(f64, f64)> = [1e3, 1e4, 1e5, 1e6].iter().map(|&k: &f64| (k, k.powf(-2.0 / 3.0))).collect();
        let f = fit_exponent(&pts).unwrap();
        assert!((f.slope + 2.0 / 3.0).abs() < 1e-12);
        assert!(f.stderr < 1e-12);
        let pts: Vec<(f64, f64)> = [10.0, 20.0, 40.0].iter().map(|&k| (k, 3.0 / k)).collect();
        assert!((fit_exponent(&pts).unwrap().slope + 1.0).abs() < 1e-12);
        assert!(fit_exponent(&pts[..2]).is_err());
        assert!(fit_exponent(&[(5.0, 1.0), (5.0, 2.0), (5.0, 3.0)]).is_err());
    }

    #[test]
    fn flatness() {
        let pts: Vec<(f64, f64)> = [1e3, 1e4, 1e5].iter().map(|&k: &f64| (k, (k / k.ln()).powf(-0.5))).collect();
        assert!((flatness_ratio(&pts, 0.5, true).unwrap() - 1.0).abs() < 1e-12);
        assert!((flatness_ratio(&pts, 0.5, false).unwrap() - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn binomial_tail() {
        assert!((binomial_upper_tail(0, 10) - 1.0).abs() < 1e-15);
        assert!((binomial_upper_tail(10, 10) - 1.0 / 1024.0).abs() < 1e-15);
        assert!((binomial_upper_tail(9, 10) - 11.0 / 1024.0).abs() < 1e-15);
        let p = binomial_upper_tail(120, 200);
        assert!(p > 0.001 && p < 0.003, "{p}");
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::new(vec![4096.0, 8192.0], 1, 1.0, 1, 0);
        assert!(c.validate().is_ok());
        c.k_grid = vec![8192.0, 8192.0];
        assert!(c.validate().is_err());
        c.k_grid = vec![4096.0];
        c.trials = 0;
        assert!(c.validate().is_err());
    }
}

//! The acceptance suite: one check per criterion, each reporting PASS or
//! FAIL with the measured numbers.

use std::time::Instant;

use rayon::prelude::*;
use twoparty_core::dpi::{chi2_sstar_bound, iproject, maximal_correlation, sstar1_grid, Joint2x2Law, PhiPsi};
use twoparty_core::elias::{gamma_decode_prefix, gamma_encode_u64, gamma_len};
use twoparty_core::estimator::{
    bernoulli_trial, mean_sd, mean_statistic_identity_check, trial_codebook, trial_samples, ScoreTable,
};
use twoparty_core::kernel::{kernel_coeffs, KernelSpec};
use twoparty_core::protocol::{replay, run_session, Transcript};
use twoparty_core::randomness::SearchPolicy;
use twoparty_core::schedule::{one_way_comm_bound_bits, tetration_comm_bound_bits, Schedule};
use twoparty_core::{BernoulliFamily, Party};

use crate::harness::{rate_exponent, run_sweep, write_csv, ExperimentConfig};

const SEED: u64 = 20_240_601;

#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Outcome {
    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!("{tag} [{:>2}] {}: {} ({:.1}s)", self.id, self.name, self.detail, self.seconds)
    }
}

type Check = fn() -> (bool, String);

pub const CRITERIA: [(u8, &str, Check); 12] = [
    (1, "unbiasedness", unbiasedness),
    (2, "one-way mse bound", one_way_mse),
    (3, "one-way communication bound", one_way_comm),
    (4, "tetration communication bound", tetration_comm),
    (5, "rate exponents", rate_exponents),
    (6, "normalizer identity", normalizer_identity),
    (7, "information bound compliance", information_bound),
    (8, "kernel moments", kernel_moments),
    (9, "elias gamma and transcript replay", elias_and_replay),
    (10, "dpi dominance", dpi_dominance),
    (11, "i-projection", i_projection),
    (12, "sweep determinism", sweep_determinism),
];

/// Runs the selected criteria (all when `only` is empty), in order.
pub fn run(only: &[u8], mut on_done: impl FnMut(&Outcome)) -> Vec<Outcome> {
    CRITERIA
        .iter()
        .filter(|(id, _, _)| only.is_empty() || only.contains(id))
        .map(|&(id, name, check)| {
            let start = Instant::now();
            let (passed, detail) = check();
            let o = Outcome { id, name, passed, detail, seconds: start.elapsed().as_secs_f64() };
            on_done(&o);
            o
        })
        .collect()
}

/// Bob's `delta_hat` and the transcript length over `trials` seeded trials.
fn bernoulli_runs(f: &BernoulliFamily, s: &Schedule, n: usize, trials: u64, seed: u64) -> Vec<(f64, usize)> {
    let table = ScoreTable::for_family(f, s).expect("score table");
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let out = bernoulli_trial(f, s, &table, n, seed, t, SearchPolicy::default(), 1.0).expect("trial");
            (out.bob.delta_hat, out.bits)
        })
        .collect()
}

/// One-way and tetration at `m = 20`, plus tetration at `m = 100`. At
/// `m = 20` the tetration schedule is `{2, 2}`, whose only odd round is the
/// one-way round, so Bob's estimate coincides with the one-way one; `m = 100`
/// gives two odd rounds.
fn multi_round_schedules() -> [(&'static str, f64, Schedule); 3] {
    [
        ("one-way m=20", 20.0, Schedule::one_way(20.0).unwrap()),
        ("tetration m=20", 20.0, Schedule::tetration(20.0).unwrap()),
        ("tetration m=100", 100.0, Schedule::tetration(100.0).unwrap()),
    ]
}

fn unbiasedness() -> (bool, String) {
    let mut ok = true;
    let mut worst = 0.0f64;
    for (name, m, s) in multi_round_schedules() {
        for delta in [0.0, 0.5, 1.0] {
            let f = BernoulliFamily::new(m, m, delta).unwrap();
            let est: Vec<f64> = bernoulli_runs(&f, &s, 20_000, 400, SEED).into_iter().map(|r| r.0).collect();
            let (mean, sd) = mean_sd(&est);
            let z = (mean - delta).abs() / (sd / 20.0);
            worst = worst.max(z);
            if z > 4.0 {
                ok = false;
                eprintln!("  {name} delta {delta}: mean {mean:.4}, |z| {z:.2}");
            }
        }
    }
    (ok, format!("max |mean - delta| / SE = {worst:.2} over 9 configs (limit 4)"))
}

fn one_way_mse() -> (bool, String) {
    let f = BernoulliFamily::new(20.0, 20.0, 0.5).unwrap();
    let s = Schedule::one_way(20.0).unwrap();
    let runs = bernoulli_runs(&f, &s, 20_000, 400, SEED);
    let mse = runs.iter().map(|r| (r.0 - 0.5).powi(2)).sum::<f64>() / runs.len() as f64;
    (mse <= 0.75, format!("mse {mse:.4} vs bound 0.75"))
}

fn one_way_comm() -> (bool, String) {
    let n = 20_000;
    let mut violations = 0;
    let mut tightest = 0.0f64;
    for m1 in [20.0, 100.0, 1000.0] {
        let s = Schedule::one_way(m1).unwrap();
        for delta in [0.0, 0.5, 1.0] {
            let f = BernoulliFamily::new(m1, m1, delta).unwrap();
            let runs = bernoulli_runs(&f, &s, n, 200, SEED + 3);
            let mean = runs.iter().map(|r| r.1 as f64).sum::<f64>() / runs.len() as f64;
            let bound = one_way_comm_bound_bits(n, m1, delta);
            tightest = tightest.max(mean / bound);
            if mean > bound {
                violations += 1;
            }
        }
    }
    (violations == 0, format!("{violations} mean-level violations over 9 configs, max mean/bound {tightest:.3}"))
}

fn tetration_comm() -> (bool, String) {
    let n = 20_000;
    let s = Schedule::tetration(100.0).unwrap();
    if s.rounds() != 4 {
        return (false, format!("tetration(100) has {} rounds, expected 4", s.rounds()));
    }
    let mut ok = true;
    let mut tightest = 0.0f64;
    for delta in [0.0, 0.5, 1.0] {
        let f = BernoulliFamily::new(100.0, 100.0, delta).unwrap();
        let runs = bernoulli_runs(&f, &s, n, 200, SEED + 4);
        let mean = runs.iter().map(|r| r.1 as f64).sum::<f64>() / runs.len() as f64;
        let bound = tetration_comm_bound_bits(n, 100.0, 100.0, delta, 4);
        tightest = tightest.max(mean / bound);
        ok &= mean <= bound;
    }
    (ok, format!("r = 4, max mean/bound {tightest:.3} over delta in {{0, 0.5, 1}}"))
}

/// The full desk-scale sweep: d = beta = 1, k = 2^12..2^18, 200 trials.
pub fn criterion5_config() -> ExperimentConfig {
    let k_grid = (12..=18).map(|e| f64::powi(2.0, e)).collect();
    ExperimentConfig::new(k_grid, 1, 1.0, 200, SEED)
}

fn rate_exponents() -> (bool, String) {
    let config = criterion5_config();
    let result = match run_sweep(&config) {
        Ok(r) => r,
        Err(e) => return (false, format!("sweep failed: {e}")),
    };
    let target = -rate_exponent(1, 1.0);
    let find = |mode: &str| result.analyses.iter().find(|a| a.mode == mode).cloned();
    let slope = find("interactive").and_then(|a| a.fit);
    let flat = find("oneway").and_then(|a| a.flatness_ratio);
    let slope_ok = slope.is_some_and(|f| (-0.81..=-0.52).contains(&f.slope));
    let flat_ok = flat.is_some_and(|r| r <= 3.0);
    let mse_at =
        |mode: &str| result.summaries.iter().find(|s| s.mode == mode && s.k == 65536.0).map(|s| s.mean_squared_error);
    let (ow, it) = (mse_at("oneway"), mse_at("interactive"));
    let sep_ok = matches!((ow, it, result.sign_test), (Some(a), Some(b), Some(t)) if b < a && t.p_value < 0.01);
    for s in &result.summaries {
        eprintln!(
            "  k {:>7} {:>11}: m1 {:>7.2} n {:>8} r {} mse {:.4e} bits {:.0} comm {} mse-bound {}",
            s.k, s.mode, s.m1, s.n, s.r, s.mean_squared_error, s.mean_bits, s.comm_compliant, s.mse_compliant
        );
    }
    for s in &result.skipped {
        eprintln!("  k {:>7} {:>11}: skipped ({})", s.k, s.mode, s.reason);
    }
    let comm_ok = result.summaries.iter().all(|s| s.comm_compliant);
    let detail = format!(
        "interactive slope {} (target {target:.3}, window [-0.81, -0.52]); one-way flatness {} (limit 3); \
         mse at 2^16 interactive {} vs one-way {}, sign-test p {}; skipped {} points; comm bounds {}",
        slope.map_or("n/a".into(), |f| format!("{:.3} +/- {:.3}", f.slope, f.stderr)),
        flat.map_or("n/a".into(), |r| format!("{r:.2}")),
        it.map_or("n/a".into(), |v| format!("{v:.4}")),
        ow.map_or("n/a".into(), |v| format!("{v:.4}")),
        result.sign_test.map_or("n/a".into(), |t| format!("{:.3e}", t.p_value)),
        result.skipped.len(),
        if comm_ok { "met" } else { "violated" },
    );
    (slope_ok && flat_ok && sep_ok, detail)
}

fn normalizer_identity() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, m, s) in multi_round_schedules() {
        let f = BernoulliFamily::new(m, m, 1.0).unwrap();
        let c = mean_statistic_identity_check(&f, &s, (500.0 * m) as usize, 400, SEED + 6, SearchPolicy::default())
            .unwrap();
        ok &= (c.ratio - 1.0).abs() <= 4.0 * c.std_err;
        parts.push(format!("{name} {:.4} +/- {:.4}", c.ratio, c.std_err));
    }
    (ok, parts.join(", "))
}

fn information_bound() -> (bool, String) {
    let mut ok = true;
    let mut min_ratio = f64::INFINITY;
    for (m1, m2) in [(20.0, 20.0), (100.0, 100.0), (100.0, 1000.0)] {
        for s in [Schedule::one_way(m1).unwrap(), Schedule::tetration(f64::min(m1, m2)).unwrap()] {
            let t = ScoreTable::build(m1, m2, &s).unwrap();
            let b = s.predicted_bounds(m1, m2);
            let ratio = t.normalizer(Party::Bob) / (2.0 * b.info_odd);
            min_ratio = min_ratio.min(ratio);
            ok &= ratio >= 1.0;
        }
    }
    (ok, format!("min I^B/n over 2 info_odd = {min_ratio:.3} across 6 cases"))
}

/// `int_{-R}^{R} u^j K(u) du` summed over unit pieces, `K` read off at each
/// piece's midpoint.
fn piecewise_moment(k: &KernelSpec, j: i32) -> f64 {
    let reach = k.k0() as i64;
    (-reach..reach)
        .map(|a| {
            let (a, b) = (a as f64, a as f64 + 1.0);
            k.evaluate(0.5 * (a + b)) * (b.powi(j + 1) - a.powi(j + 1)) / (j + 1) as f64
        })
        .sum()
}

fn kernel_moments() -> (bool, String) {
    let mut worst = 0.0f64;
    for l in 1..=6 {
        let k = kernel_coeffs(l).unwrap();
        worst = worst.max((piecewise_moment(&k, 0) - 1.0).abs());
        for j in 1..=l as i32 {
            worst = worst.max(piecewise_moment(&k, j).abs());
        }
    }
    let c = kernel_coeffs(2).unwrap();
    let c_err = (c.coeffs()[0] - 2.0 / 3.0).abs().max((c.coeffs()[1] + 1.0 / 12.0).abs());
    (worst < 1e-9 && c_err < 1e-12, format!("max moment error {worst:.2e}, l=2 coefficient error {c_err:.2e}"))
}

fn elias_and_replay() -> (bool, String) {
    for j in 1..=100_000u64 {
        let want = 2 * (63 - j.leading_zeros() as usize) + 1;
        let code = match gamma_encode_u64(j) {
            Ok(c) if c.len() == want => c,
            other => return (false, format!("encoding of {j}: {other:?}")),
        };
        match gamma_decode_prefix(&code) {
            Ok((v, used)) if v.to_u64_digits() == [j] && used == want && gamma_len(&v) == want as u64 => {}
            other => return (false, format!("decode of {j}: {other:?}")),
        }
    }
    let f = BernoulliFamily::new(20.0, 20.0, 0.5).unwrap();
    for t in 0..100u64 {
        let s = if t % 2 == 0 { Schedule::one_way(20.0).unwrap() } else { Schedule::tetration(20.0).unwrap() };
        let (xs, ys) = trial_samples(&f, 200 + 37 * t as usize, SEED + 9, t);
        let sess = run_session(&xs, &ys, &s, trial_codebook(SEED + 9, t, SearchPolicy::default())).unwrap();
        let back = match Transcript::from_bytes(&sess.transcript.to_bytes()) {
            Ok(b) => b,
            Err(e) => return (false, format!("session {t}: {e}")),
        };
        let a = replay(Party::Alice, &xs, &back, &s, &sess.codebook);
        let b = replay(Party::Bob, &ys, &back, &s, &sess.codebook);
        let same = matches!((&a, &b), (Ok(a), Ok(b)) if (0..=s.rounds()).all(|i| {
            a.u_vector(i) == sess.alice.u_vector(i) && b.u_vector(i) == sess.bob.u_vector(i)
        }));
        if !same {
            return (false, format!("session {t} did not replay"));
        }
    }
    (true, "1..=100000 round-trip with exact lengths; 100 sessions replayed".into())
}

fn dpi_dominance() -> (bool, String) {
    let mut ok = true;
    let (mut max_ratio, mut corr_err) = (0.0f64, 0.0f64);
    for m in [15.0, 1e2, 1e3, 1e4] {
        for delta in [0.1, 0.5, 0.9] {
            let law = Joint2x2Law::bernoulli(m, delta).unwrap();
            let s = sstar1_grid(&law, 10_000).unwrap();
            let bound = chi2_sstar_bound(m, delta).unwrap();
            max_ratio = max_ratio.max(s / bound);
            ok &= s <= bound * (1.0 + 1e-6);
            corr_err = corr_err.max((maximal_correlation(&law) - delta / (m - 1.0)).abs());
        }
    }
    ok &= corr_err <= 1e-10;
    (ok, format!("max sstar/bound {max_ratio:.4}, max correlation error {corr_err:.1e}"))
}

fn i_projection() -> (bool, String) {
    let laws = [
        Joint2x2Law::symmetric(0.02, 0.1).unwrap(),
        Joint2x2Law::symmetric(0.05, -0.5).unwrap(),
        Joint2x2Law::bernoulli(100.0, 0.5).unwrap(),
        Joint2x2Law::bernoulli(15.0, 0.9).unwrap(),
        Joint2x2Law::new([[0.1, 0.2], [0.3, 0.4]]).unwrap(),
    ];
    let mut worst_res = 0.0f64;
    let mut converged = true;
    for law in &laws {
        for (a, b) in [(0.03, 0.05), (0.5, 0.5), (0.9, 0.2), (0.01, 0.99)] {
            let r = iproject(law, a, b, 1e-10, 10_000).unwrap();
            converged &= r.converged && r.iterations <= 10_000;
            worst_res = worst_res.max(r.residual);
        }
    }
    let mut lambda_err = 0.0f64;
    for (p, delta) in [(0.01, 0.05), (0.02, 0.1), (0.05, 0.5)] {
        let law = Joint2x2Law::symmetric(p, delta).unwrap();
        let r = iproject(&law, p, p, 1e-10, 10_000).unwrap();
        lambda_err = lambda_err.max((r.lambda - delta * p * p).abs() / (delta * p * p));
    }
    let mut sup = 0.0f64;
    for p in [0.01, 0.02, 0.05] {
        for delta in [0.05, 0.1] {
            let s = PhiPsi::new(p, delta).unwrap().grid_sup(50).unwrap();
            sup = sup.max(s / (p * delta * delta));
        }
    }
    let ok = converged && worst_res < 1e-10 && lambda_err < 1e-12 && sup <= 50.0;
    (ok, format!("max residual {worst_res:.1e}, lambda(p,p) rel. error {lambda_err:.1e}, sup phi/psi/(p delta^2) {sup:.3} (limit 50)"))
}

fn sweep_determinism() -> (bool, String) {
    let mut config = ExperimentConfig::new(vec![16384.0, 65536.0], 1, 1.0, 3, SEED + 12);
    config.trials = 3;
    let render = || -> anyhow::Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_csv(&run_sweep(&config)?.records, false, &mut buf)?;
        Ok(buf)
    };
    match (render(), render()) {
        (Ok(a), Ok(b)) => (a == b && !a.is_empty(), format!("{} bytes, identical: {}", a.len(), a == b)),
        (Err(e), _) | (_, Err(e)) => (false, format!("sweep failed: {e}")),
    }
}

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use twoparty::acceptance;
use twoparty::config::{parse_budget, Settings};
use twoparty::harness::{run_sweep, summary_json, write_csv, ExperimentConfig};
use twoparty::io::{read_samples, write_transcript};
use twoparty_core::density::{estimate_density, estimate_density_from_samples, plan, DensityConfig, Mode, TestDensity};
use twoparty_core::dpi::{chi2_sstar_bound, maximal_correlation, sstar1_grid, Joint2x2Law, PhiPsi};
use twoparty_core::estimator::{
    bernoulli_trial, mean_sd, trial_codebook, trial_samples, ScoreTable, SEED_DOMAIN_COMMON,
};
use twoparty_core::kernel::{kernel_coeffs, kernel_moment};
use twoparty_core::protocol::run_session;
use twoparty_core::randomness::{derive_seed, SearchPolicy};
use twoparty_core::schedule::{
    one_way_comm_bound_bits, one_way_mse_bound, tetration_comm_bound_bits, tetration_mse_bound, Schedule,
};
use twoparty_core::{BernoulliFamily, Party};

/// Two-party estimation of correlation and density under communication
/// constraints.
#[derive(Parser)]
#[command(name = "twoparty", version)]
struct Cli {
    /// Flat TOML file with defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One run (or a batch of trials) of the Bernoulli protocol.
    Bernoulli(Flags),
    /// One pointwise density estimate.
    Density(Flags),
    /// Risk curves over a grid of bit budgets (CSV + JSON summary).
    Sweep(Flags),
    /// A schedule and its bounds.
    Schedule(Flags),
    /// Kernel coefficients and moments.
    Kernel(Flags),
    /// Strong data processing tables.
    Dpi(Flags),
    /// The acceptance suite.
    Selftest(SelftestArgs),
}

#[derive(Args, Clone, Default)]
struct Flags {
    /// Bit budget, e.g. 65536 or 2^16.
    #[arg(long, value_parser = parse_budget)]
    k: Option<f64>,
    /// Comma-separated bit budgets, strictly increasing.
    #[arg(long, value_delimiter = ',', value_parser = parse_budget)]
    k_grid: Option<Vec<f64>>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    /// oneway, interactive, or both (sweep only).
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    m1: Option<f64>,
    #[arg(long)]
    m2: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Sample size.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sample file of little-endian f64 rows (x then y).
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Clamp estimates to the feasible range.
    #[arg(long)]
    clamp: bool,
    /// Record wall time per trial (breaks byte-reproducibility).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    delta_max: Option<f64>,
    /// Kernel order.
    #[arg(long)]
    order: Option<usize>,
    /// Marginal probability for the phi/psi table.
    #[arg(long)]
    p: Option<f64>,
}

impl Flags {
    fn settings(self) -> Settings {
        Settings {
            k: self.k,
            k_grid: self.k_grid,
            d: self.d,
            beta: self.beta,
            mode: self.mode,
            trials: self.trials,
            seed: self.seed,
            m1: self.m1,
            m2: self.m2,
            delta: self.delta,
            n: self.n,
            out: self.out,
            samples: self.samples,
            clamp: self.clamp.then_some(true),
            timing: self.timing.then_some(true),
            delta_max: self.delta_max,
            order: self.order,
            p: self.p,
        }
    }
}

#[derive(Args)]
struct SelftestArgs {
    /// Comma-separated criterion numbers to run (default: all).
    #[arg(long, value_delimiter = ',')]
    only: Vec<u8>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let file = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    let merge = |f: Flags| f.settings().over(file.clone());
    match cli.command {
        Command::Bernoulli(f) => bernoulli(merge(f))?,
        Command::Density(f) => density(merge(f))?,
        Command::Sweep(f) => sweep(merge(f))?,
        Command::Schedule(f) => schedule(merge(f))?,
        Command::Kernel(f) => kernel(merge(f))?,
        Command::Dpi(f) => dpi(merge(f))?,
        Command::Selftest(a) => {
            let results = acceptance::run(&a.only, |o| println!("{}", o.line()));
            let failed = results.iter().filter(|o| !o.passed).count();
            println!("{} passed, {failed} failed", results.len() - failed);
            return Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn single_mode(s: &Settings, default: Mode) -> Result<Mode> {
    match s.mode.as_deref() {
        None => Ok(default),
        Some(m) => m.parse().map_err(|e| anyhow!("{e}")),
    }
}

fn sweep_modes(s: &Settings) -> Result<Vec<Mode>> {
    match s.mode.as_deref() {
        None | Some("both") => Ok(vec![Mode::OneWay, Mode::Interactive]),
        Some(m) => Ok(vec![m.parse().map_err(|e| anyhow!("{e}"))?]),
    }
}

fn schedule_for(mode: Mode, m1: f64, m2: f64) -> Result<Schedule> {
    Ok(match mode {
        Mode::OneWay => Schedule::one_way(m1)?,
        Mode::Interactive => Schedule::tetration(m1.min(m2))?,
    })
}

fn bernoulli(s: Settings) -> Result<()> {
    let m1 = s.m1.unwrap_or(20.0);
    let m2 = s.m2.unwrap_or(m1);
    let delta = s.delta.unwrap_or(0.5);
    let n = s.n.unwrap_or(20_000);
    let seed = s.seed.unwrap_or(0);
    let trials = s.trials.unwrap_or(1);
    let delta_max = s.delta_max.unwrap_or(delta.max(0.0));
    let mode = single_mode(&s, Mode::OneWay)?;
    let family = BernoulliFamily::new(m1, m2, delta)?;
    let sched = schedule_for(mode, m1, m2)?;
    let table = ScoreTable::for_family(&family, &sched)?;
    println!("schedule {}", sched.to_config_string());
    if trials <= 1 {
        let (xs, ys) = trial_samples(&family, n, seed, 0);
        let session = run_session(&xs, &ys, &sched, trial_codebook(seed, 0, SearchPolicy::default()))?;
        let bob = table.estimate(&session.bob, delta_max)?;
        println!("bits {}", session.transcript.bit_count());
        println!("round_bits {:?}", session.transcript.round_bit_lengths());
        println!("delta_hat {}", bob.delta_hat);
        if !table.is_degenerate(Party::Alice) {
            println!("delta_hat_alice {}", table.estimate(&session.alice, delta_max)?.delta_hat);
        }
        println!("predicted_mse {}", bob.predicted_mse);
        if let Some(path) = &s.out {
            write_transcript(path, &session.transcript)?;
            println!("transcript {}", path.display());
        }
        return Ok(());
    }
    let runs = (0..trials as u64)
        .map(|t| bernoulli_trial(&family, &sched, &table, n, seed, t, SearchPolicy::default(), delta_max))
        .collect::<Result<Vec<_>, _>>()?;
    let est: Vec<f64> = runs.iter().map(|r| r.bob.delta_hat).collect();
    let (mean, sd) = mean_sd(&est);
    let mse = est.iter().map(|e| (e - delta).powi(2)).sum::<f64>() / trials as f64;
    let bits = runs.iter().map(|r| r.bits as f64).sum::<f64>() / trials as f64;
    let (comm_bound, mse_bound) = match mode {
        Mode::OneWay => (one_way_comm_bound_bits(n, m1, delta), one_way_mse_bound(n, m1, m2, delta)),
        Mode::Interactive => {
            (tetration_comm_bound_bits(n, m1, m2, delta, sched.rounds()), tetration_mse_bound(n, m1, m2, delta))
        }
    };
    println!("trials {trials}");
    println!("mean_delta_hat {mean}");
    println!("std_err {}", sd / (trials as f64).sqrt());
    println!("mse {mse}");
    println!("mse_bound {mse_bound}");
    println!("mean_bits {bits}");
    println!("comm_bound {comm_bound}");
    Ok(())
}

fn density(s: Settings) -> Result<()> {
    let k = s.k.context("--k is required")?;
    let d = s.d.unwrap_or(1);
    let beta = s.beta.unwrap_or(1.0);
    let seed = s.seed.unwrap_or(0);
    let mut config = DensityConfig::new(d, beta, k, single_mode(&s, Mode::Interactive)?);
    config.clamp = s.clamp.unwrap_or(false);
    config.delta_max = s.delta_max.unwrap_or(1.0);
    let p = plan(&config)?;
    println!("mode {}", config.mode.name());
    println!("m {}", p.m);
    println!("h {}", p.h);
    println!("kernel_order {}", p.kernel.order());
    println!("sessions {}", p.subplans.len());
    println!("n {}", p.samples_needed());
    println!("rounds {}", p.subplans[0].schedule.rounds());
    let est = match &s.samples {
        Some(path) => {
            let (xs, ys) = read_samples(path, d)?;
            let common = derive_seed(seed, SEED_DOMAIN_COMMON, 0);
            estimate_density_from_samples(&p, &xs, &ys, common, SearchPolicy::default())?
        }
        None => {
            let td = TestDensity::benchmark(k, d, beta)?;
            let est = estimate_density(&p, &td, seed, 0, SearchPolicy::default())?;
            println!("truth {}", td.truth());
            println!("smoothed_truth {}", td.smoothed_truth(&p));
            est
        }
    };
    println!("p_hat {}", est.p_hat);
    println!("delta_hat {}", est.delta_hat());
    println!("bits_used {}", est.bits_used);
    Ok(())
}

fn sweep(s: Settings) -> Result<()> {
    let k_grid = s.k_grid.clone().unwrap_or_else(|| (12..=18).map(|e| f64::powi(2.0, e)).collect());
    let mut config = ExperimentConfig::new(
        k_grid,
        s.d.unwrap_or(1),
        s.beta.unwrap_or(1.0),
        s.trials.unwrap_or(200),
        s.seed.unwrap_or(0),
    );
    config.modes = sweep_modes(&s)?;
    config.clamp = s.clamp.unwrap_or(false);
    config.timing = s.timing.unwrap_or(false);
    config.delta_max = s.delta_max.unwrap_or(1.0);
    let result = run_sweep(&config)?;
    let out = s.out.unwrap_or_else(|| PathBuf::from("sweep.csv"));
    let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
    write_csv(&result.records, config.timing, BufWriter::new(file))?;
    let json_path = out.with_extension("json");
    std::fs::write(&json_path, summary_json(&result)? + "\n")
        .with_context(|| format!("writing {}", json_path.display()))?;
    for p in &result.summaries {
        println!(
            "k {} {}: mse {:.4e} (median {:.4e}), mean bits {:.0}, comm bound {}",
            p.k,
            p.mode,
            p.mean_squared_error,
            p.median_squared_error,
            p.mean_bits,
            if p.comm_compliant { "met" } else { "violated" }
        );
    }
    for p in &result.skipped {
        println!("k {} {}: skipped ({})", p.k, p.mode, p.reason);
    }
    for a in &result.analyses {
        if let Some(f) = a.fit {
            println!("{} slope {:.3} +/- {:.3} (target {:.3})", a.mode, f.slope, f.stderr, a.target_slope);
        }
    }
    println!("wrote {} and {}", out.display(), json_path.display());
    Ok(())
}

fn schedule(s: Settings) -> Result<()> {
    let m1 = s.m1.context("--m1 is required")?;
    let m2 = s.m2.unwrap_or(m1);
    let sched = schedule_for(single_mode(&s, Mode::Interactive)?, m1, m2)?;
    sched.validate_for(m1, m2)?;
    let b = sched.predicted_bounds(m1, m2);
    let table = ScoreTable::build(m1, m2, &sched)?;
    println!("schedule {}", sched.to_config_string());
    println!("rounds {}", sched.rounds());
    println!("odd_product {}", sched.odd_product());
    println!("even_product {}", sched.even_product());
    println!("comm_odd_nats {}", b.comm_odd);
    println!("comm_even_nats {}", b.comm_even);
    println!("info_odd {}", b.info_odd);
    println!("info_even {}", b.info_even);
    println!("exact_comm_alice_nats {}", sched.exact_comm_rate(m1, m2, Party::Alice));
    println!("exact_comm_bob_nats {}", sched.exact_comm_rate(m1, m2, Party::Bob));
    println!("normalizer_bob {}", table.normalizer(Party::Bob));
    if !table.is_degenerate(Party::Alice) {
        println!("normalizer_alice {}", table.normalizer(Party::Alice));
    }
    Ok(())
}

fn kernel(s: Settings) -> Result<()> {
    let l = s.order.unwrap_or(2);
    let k = kernel_coeffs(l)?;
    println!("order {l}");
    for (i, c) in k.coeffs().iter().enumerate() {
        println!("c{} {c}", i + 1);
    }
    for j in 0..=l + 2 {
        println!("moment{j} {}", kernel_moment(&k, j));
    }
    Ok(())
}

fn dpi(s: Settings) -> Result<()> {
    let mut w: Box<dyn Write> = match &s.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    };
    if let Some(p) = s.p {
        let deltas = s.delta.map_or_else(|| vec![0.05, 0.1], |d| vec![d]);
        writeln!(w, "p,delta,sup_phi_over_psi,scaled")?;
        for delta in deltas {
            let sup = PhiPsi::new(p, delta)?.grid_sup(50)?;
            writeln!(w, "{p},{delta},{sup},{}", sup / (p * delta * delta))?;
        }
        return Ok(());
    }
    let ms = s.m1.map_or_else(|| vec![15.0, 1e2, 1e3, 1e4], |m| vec![m]);
    let deltas = s.delta.map_or_else(|| vec![0.1, 0.5, 0.9], |d| vec![d]);
    writeln!(w, "m,delta,sstar1_grid,chi2_bound,maximal_correlation")?;
    for &m in &ms {
        for &delta in &deltas {
            let law = Joint2x2Law::bernoulli(m, delta)?;
            if m <= 1.0 {
                bail!("m must exceed 1");
            }
            writeln!(
                w,
                "{m},{delta},{},{},{}",
                sstar1_grid(&law, 10_000)?,
                chi2_sstar_bound(m, delta)?,
                maximal_correlation(&law)
            )?;
        }
    }
    Ok(())
}

//! Pointwise density estimation at `(x0, y0)` through the Bernoulli protocol.
//!
//! Each party binarizes its samples by a box around the evaluation point,
//! `X' = 1{X not in A}`, `Y' = 1{Y not in B}`, so `(X', Y')` follows the
//! biased Bernoulli family with `m1 = 1/P(A)`, `m2 = 1/P(B)`. Bob's estimate
//! of `delta` then gives `P(A x B) = (1 + delta) / (m1 m2)`, and dividing by
//! the box volumes gives the density.
//!
//! Marginals are taken to be uniform on `[0, 1]^d`, so a box of half-width
//! `w` has probability `(2w)^d`. For kernel orders `l > 1` the estimate is a
//! weighted sum over pairs of nested boxes, one Bernoulli session each, with
//! the bit budget split evenly.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::estimator::{ScoreTable, SEED_DOMAIN_COMMON, SEED_DOMAIN_SAMPLES};
use crate::family::BernoulliFamily;
use crate::kernel::{kernel_coeffs, order_for_smoothness, KernelSpec};
use crate::math;
use crate::protocol::run_session;
use crate::randomness::{derive_seed, Codebook, SearchPolicy, SharedRandomness};
use crate::schedule::Schedule;

/// Seed domain of the common randomness of each box pair in a trial.
pub const SEED_DOMAIN_SUBPROBLEM: u16 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    OneWay,
    Interactive,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::OneWay => "oneway",
            Mode::Interactive => "interactive",
        }
    }
}

impl core::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oneway" | "one-way" => Ok(Mode::OneWay),
            "interactive" => Ok(Mode::Interactive),
            _ => Err(Error::InvalidSchedule("mode must be oneway or interactive")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityConfig {
    pub d: usize,
    pub beta: f64,
    /// Communication budget in bits.
    pub k: f64,
    pub mode: Mode,
    /// A priori upper bound on `delta`, used to size `n`.
    pub delta_max: f64,
    /// Clamp each `delta` estimate to its feasible range.
    pub clamp: bool,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
}

impl DensityConfig {
    /// Evaluation point at the center of the cube, `delta_max = 1`, no clamp.
    pub fn new(d: usize, beta: f64, k: f64, mode: Mode) -> Self {
        DensityConfig {
            d,
            beta,
            k,
            mode,
            delta_max: 1.0,
            clamp: false,
            x0: alloc::vec![0.5; d],
            y0: alloc::vec![0.5; d],
        }
    }
}

/// The box test of one party: `0` inside, `1` outside.
#[derive(Clone, Debug, PartialEq)]
pub struct BinarizationMap {
    pub center: Vec<f64>,
    pub half_widths: Vec<f64>,
}

impl BinarizationMap {
    pub fn contains(&self, point: &[f64]) -> bool {
        point.iter().zip(&self.center).zip(&self.half_widths).all(|((p, c), w)| math::abs(p - c) <= *w)
    }

    pub fn bit(&self, point: &[f64]) -> u8 {
        (!self.contains(point)) as u8
    }

    pub fn volume(&self) -> f64 {
        self.half_widths.iter().map(|w| 2.0 * w).product()
    }

    /// `1/P(box)` under uniform marginals.
    pub fn inverse_probability(&self) -> f64 {
        1.0 / self.volume()
    }

    /// Binarizes `n` points stored row-major with `d` coordinates each.
    pub fn binarize(&self, points: &[f64], n: usize) -> Vec<u8> {
        let d = self.center.len();
        points.chunks_exact(d).take(n).map(|p| self.bit(p)).collect()
    }
}

/// One Bernoulli estimation of the plan: a box pair and its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SubPlan {
    pub x_map: BinarizationMap,
    pub y_map: BinarizationMap,
    /// Product kernel coefficient of the pair.
    pub weight: f64,
    pub m1: f64,
    pub m2: f64,
    pub n: usize,
    pub schedule: Schedule,
    /// Bits allotted to this pair.
    pub budget: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub config: DensityConfig,
    /// Inverse probability of the unit box.
    pub m: f64,
    pub h: f64,
    pub kernel: KernelSpec,
    pub subplans: Vec<SubPlan>,
}

impl Plan {
    /// Sample pairs needed; sub-estimations share a prefix of the stream.
    pub fn samples_needed(&self) -> usize {
        self.subplans.iter().map(|s| s.n).max().unwrap_or(0)
    }
}

/// Sample size of the one-way plan for a budget of `k` bits.
pub fn one_way_n(k: f64, m1: f64, delta_max: f64) -> usize {
    let per_sample = 2.2 * (1.0 + delta_max) / m1 * math::log2(m1 / 10.0);
    math::floor((k - 1.0) / per_sample) as usize
}

/// Sample size of the interactive plan for a budget of `k` bits.
pub fn interactive_n(k: f64, m: f64, delta_max: f64) -> usize {
    math::floor(m * k * core::f64::consts::LN_2 / (13.0 * (1.0 + delta_max))) as usize
}

/// Picks the bandwidth, the box pairs, the sample sizes and the schedules.
pub fn plan(config: &DensityConfig) -> Result<Plan> {
    let d = config.d;
    if d == 0 || config.x0.len() != d || config.y0.len() != d {
        return Err(Error::Domain { name: "d", value: d as f64 });
    }
    if !(config.beta > 0.0 && config.beta.is_finite()) {
        return Err(Error::Domain { name: "beta", value: config.beta });
    }
    if !(config.delta_max >= 0.0 && config.delta_max.is_finite()) {
        return Err(Error::Domain { name: "delta_max", value: config.delta_max });
    }
    let kernel = kernel_coeffs(order_for_smoothness(config.beta))?.with_dimension(d)?;
    let terms = kernel.tensor_terms();
    let budget = config.k / (terms.len() * terms.len()) as f64;
    if !(budget > 2.0) {
        return Err(Error::BudgetTooSmall { m: 0.0 });
    }
    let exponent = d as f64 / (d as f64 + 2.0 * config.beta);
    let m = match config.mode {
        Mode::OneWay => math::powf(budget / math::log2(budget), exponent),
        Mode::Interactive => math::powf(budget, exponent),
    };
    if !(m > 10.0) {
        return Err(Error::BudgetTooSmall { m });
    }
    let h = 0.5 * math::powf(m, -1.0 / d as f64);
    let reach = kernel.k0() as f64 * h;
    for &c in config.x0.iter().chain(&config.y0) {
        if c - reach < 0.0 || c + reach > 1.0 {
            return Err(Error::SupportOverflow { m, d });
        }
    }

    let mut subplans = Vec::with_capacity(terms.len() * terms.len());
    for tx in &terms {
        for ty in &terms {
            let x_map = BinarizationMap {
                center: config.x0.clone(),
                half_widths: tx.radii.iter().map(|&r| r as f64 * h).collect(),
            };
            let y_map = BinarizationMap {
                center: config.y0.clone(),
                half_widths: ty.radii.iter().map(|&r| r as f64 * h).collect(),
            };
            let m1 = m / tx.radii.iter().product::<usize>() as f64;
            let m2 = m / ty.radii.iter().product::<usize>() as f64;
            if !(m1.min(m2) > 10.0) {
                return Err(Error::BudgetTooSmall { m: m1.min(m2) });
            }
            let (n, schedule) = match config.mode {
                Mode::OneWay => (one_way_n(budget, m1, config.delta_max), Schedule::one_way(m1)?),
                Mode::Interactive => {
                    let mm = m1.min(m2);
                    (interactive_n(budget, mm, config.delta_max), Schedule::tetration(mm)?)
                }
            };
            if n == 0 {
                return Err(Error::BudgetTooSmall { m: m1.min(m2) });
            }
            subplans.push(SubPlan { x_map, y_map, weight: tx.weight * ty.weight, m1, m2, n, schedule, budget });
        }
    }
    Ok(Plan { config: config.clone(), m, h, kernel, subplans })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubEstimate {
    pub delta_hat: f64,
    pub bits: usize,
    pub n: usize,
    pub m1: f64,
    pub m2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityEstimate {
    pub p_hat: f64,
    pub bits_used: usize,
    pub subestimates: Vec<SubEstimate>,
}

impl DensityEstimate {
    /// The `delta` estimate of the first (unit) box pair.
    pub fn delta_hat(&self) -> f64 {
        self.subestimates.first().map_or(f64::NAN, |s| s.delta_hat)
    }
}

/// Runs the plan on given samples (row-major, `d` coordinates per point).
pub fn estimate_density_from_samples(
    plan: &Plan,
    xs: &[f64],
    ys: &[f64],
    common_seed: u64,
    policy: SearchPolicy,
) -> Result<DensityEstimate> {
    let d = plan.config.d;
    let needed = plan.samples_needed();
    for z in [xs, ys] {
        if z.len() < needed * d {
            return Err(Error::LengthMismatch { expected: needed * d, got: z.len() });
        }
    }
    let h2d = math::powi(plan.h, 2 * d as i32);
    let mut p_hat = 0.0;
    let mut bits_used = 0;
    let mut subestimates = Vec::with_capacity(plan.subplans.len());
    for (s, sub) in plan.subplans.iter().enumerate() {
        let xb = sub.x_map.binarize(xs, sub.n);
        let yb = sub.y_map.binarize(ys, sub.n);
        let table = ScoreTable::build(sub.m1, sub.m2, &sub.schedule)?;
        let shared = SharedRandomness::new(derive_seed(common_seed, SEED_DOMAIN_SUBPROBLEM, s as u64));
        let session = run_session(&xb, &yb, &sub.schedule, Codebook::new(shared, policy))?;
        let report = table.estimate(&session.bob, plan.config.delta_max)?;
        let mut delta_hat = report.delta_hat;
        if plan.config.clamp {
            delta_hat = delta_hat.clamp(-1.0, sub.m1.min(sub.m2) - 1.0);
        }
        p_hat += sub.weight * (1.0 + delta_hat) / (sub.m1 * sub.m2 * h2d);
        let bits = session.transcript.bit_count();
        bits_used += bits;
        subestimates.push(SubEstimate { delta_hat, bits, n: sub.n, m1: sub.m1, m2: sub.m2 });
    }
    Ok(DensityEstimate { p_hat, bits_used, subestimates })
}

/// One seeded trial on the test density. Samples and common randomness use
/// independent seeds derived from `(seed, trial)`, shared across modes.
pub fn estimate_density(
    plan: &Plan,
    td: &TestDensity,
    seed: u64,
    trial: u64,
    policy: SearchPolicy,
) -> Result<DensityEstimate> {
    if td.d() != plan.config.d {
        return Err(Error::LengthMismatch { expected: plan.config.d, got: td.d() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SEED_DOMAIN_SAMPLES, trial));
    let (xs, ys) = td.sample(plan.samples_needed(), &mut rng);
    estimate_density_from_samples(plan, &xs, &ys, derive_seed(seed, SEED_DOMAIN_COMMON, trial), policy)
}

/// `g(t) = (1 + cos(pi t)) / 2` on `[-1, 1]`.
fn bump1(t: f64) -> f64 {
    if math::abs(t) <= 1.0 {
        0.5 * (1.0 + math::cos(core::f64::consts::PI * t))
    } else {
        0.0
    }
}

/// `int_{-w}^{w} g(s u) du`.
fn bump1_integral(s: f64, w: f64) -> f64 {
    let c = (s * w).min(1.0);
    (c + math::sin(core::f64::consts::PI * c) / core::f64::consts::PI) / s
}

/// A smooth density on `[0, 1]^{2d}` with uniform marginals whose
/// binarization at scale `m` is the biased Bernoulli family.
///
/// A latent pair `(X', Y')` is drawn from the family with `m1 = m2 = m`.
/// Given `X' = 0`, `X` has density `m f(m^{1/d} (x - x0))` with
/// `f(z) = prod_j g(z_j)`; given `X' = 1` it has density proportional to
/// `1 - f(m^{1/d} (x - x0))` on the cube. Likewise for `Y`. The joint
/// density is `1 + delta a(x) a(y)` with `a = (m f - 1)/(m - 1)`, so the
/// value at `(x0, y0)` is `1 + delta`.
#[derive(Clone, Debug, PartialEq)]
pub struct TestDensity {
    latent: BernoulliFamily,
    d: usize,
    scale: f64,
    x0: Vec<f64>,
    y0: Vec<f64>,
}

impl TestDensity {
    /// Centered at the middle of the cube.
    pub fn new(m: f64, delta: f64, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain { name: "d", value: 0.0 });
        }
        let latent = BernoulliFamily::new(m, m, delta)?;
        let scale = math::powf(m, 1.0 / d as f64);
        if 1.0 / scale > 0.5 {
            return Err(Error::SupportOverflow { m, d });
        }
        Ok(TestDensity { latent, d, scale, x0: alloc::vec![0.5; d], y0: alloc::vec![0.5; d] })
    }

    /// The benchmark used by the sweeps: `m = k^{d/(d+2 beta)}` and
    /// `delta = m^{-beta/d}`.
    pub fn benchmark(k: f64, d: usize, beta: f64) -> Result<Self> {
        let m = math::powf(k, d as f64 / (d as f64 + 2.0 * beta));
        Self::new(m, math::powf(m, -beta / d as f64), d)
    }

    pub fn m(&self) -> f64 {
        self.latent.m1()
    }

    pub fn delta(&self) -> f64 {
        self.latent.delta()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    fn bump(&self, point: &[f64], center: &[f64]) -> f64 {
        point.iter().zip(center).map(|(p, c)| bump1(self.scale * (p - c))).product()
    }

    fn a(&self, point: &[f64], center: &[f64]) -> f64 {
        let m = self.m();
        (m * self.bump(point, center) - 1.0) / (m - 1.0)
    }

    pub fn density_at(&self, x: &[f64], y: &[f64]) -> f64 {
        let inside = x.iter().chain(y).all(|&c| (0.0..=1.0).contains(&c));
        if !inside {
            return 0.0;
        }
        1.0 + self.delta() * self.a(x, &self.x0) * self.a(y, &self.y0)
    }

    /// The density at the evaluation point, `1 + delta`.
    pub fn truth(&self) -> f64 {
        self.density_at(&self.x0, &self.y0)
    }

    /// `int_box a(x) dx` for a cube of half-widths `w` around the center.
    fn a_integral(&self, w: &[f64]) -> f64 {
        let m = self.m();
        let vol: f64 = w.iter().map(|wj| 2.0 * wj).product();
        let f: f64 = w.iter().map(|&wj| bump1_integral(self.scale, wj)).product();
        (m * f - vol) / (m - 1.0)
    }

    /// Exact `P(X in A, Y in B)` for boxes inside the cube, centered at the
    /// evaluation point.
    pub fn box_probability(&self, a: &BinarizationMap, b: &BinarizationMap) -> f64 {
        a.volume() * b.volume() + self.delta() * self.a_integral(&a.half_widths) * self.a_integral(&b.half_widths)
    }

    /// `E[p_hat]` under `plan`: the kernel-smoothed density at the point.
    pub fn smoothed_truth(&self, plan: &Plan) -> f64 {
        let h2d = math::powi(plan.h, 2 * plan.config.d as i32);
        plan.subplans.iter().map(|s| s.weight * self.box_probability(&s.x_map, &s.y_map) / h2d).sum()
    }

    fn sample_given(&self, latent: u8, center: &[f64], rng: &mut dyn RngCore, out: &mut Vec<f64>) {
        let unit = |rng: &mut dyn RngCore| math::unit_f64(rng.next_u64());
        if latent == 0 {
            for &c in center {
                let t = loop {
                    let t = 2.0 * unit(rng) - 1.0;
                    if unit(rng) < bump1(t) {
                        break t;
                    }
                };
                out.push(c + t / self.scale);
            }
        } else {
            let start = out.len();
            loop {
                out.truncate(start);
                for _ in 0..self.d {
                    out.push(unit(rng));
                }
                let f = self.bump(&out[start..], center);
                if unit(rng) >= f {
                    break;
                }
            }
        }
    }

    /// `n` pairs, each as `d` coordinates, row-major.
    pub fn sample<R: RngCore>(&self, n: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let (lx, ly) = self.latent.sample(n, rng);
        let mut xs = Vec::with_capacity(n * self.d);
        let mut ys = Vec::with_capacity(n * self.d);
        for (a, b) in lx.into_iter().zip(ly) {
            self.sample_given(a, &self.x0, rng, &mut xs);
            self.sample_given(b, &self.y0, rng, &mut ys);
        }
        (xs, ys)
    }
}

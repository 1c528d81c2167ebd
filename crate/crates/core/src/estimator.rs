//! Score functions, the exact normalizers and the unbiased estimators.
//!
//! For a round `i` refined by one party, the other party holds `v` and scores
//! the message bit `u` on the all-zero branch by
//!
//! ```text
//! Gamma_i(u | v) = d/d delta log P(U_i = u | other = v, U^{i-1} = 0) at delta = 0
//! ```
//!
//! and by 0 once the sample has been absorbed. Bob sums the scores of the
//! rounds Alice refines; Alice those Bob refines. Every law in sight is
//! affine in `delta`, so `E[Gamma] = delta * I` holds exactly with
//! `I = n * sum_i sum_{u,v} Gamma_i(u|v) dP_i(u, v)`, and `Gamma / I` is
//! unbiased.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

use crate::error::{Error, Result};
use crate::family::{affine_joint, BernoulliFamily, Matrix2, Party, ZeroBranchState};
use crate::protocol::{run_session, SessionState};
use crate::randomness::{derive_seed, Codebook, SearchPolicy, SharedRandomness};
use crate::schedule::Schedule;

/// Seed domain of the sample stream of a trial.
pub const SEED_DOMAIN_SAMPLES: u16 = 1;
/// Seed domain of the common randomness of a trial.
pub const SEED_DOMAIN_COMMON: u16 = 2;

/// Scores of one round, indexed `[v][u]` with `v` the non-refining party's
/// sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundScores {
    pub round: usize,
    pub refiner: Party,
    pub gamma: Matrix2,
    /// `sum Gamma * dP / d delta` over `(u, v)`, per sample.
    pub information: f64,
    /// `sum Gamma^2 * P` at `delta = 0`, per sample.
    pub second_moment: f64,
    /// `sum_u Gamma(u | v) P(u | v)` for each `v`; zero up to rounding.
    pub conditional_mean: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    m1: f64,
    m2: f64,
    rounds: Vec<RoundScores>,
}

impl ScoreTable {
    pub fn build(m1: f64, m2: f64, schedule: &Schedule) -> Result<Self> {
        BernoulliFamily::new(m1, m2, 0.0)?;
        let mut state = ZeroBranchState::from_joint(affine_joint(m1, m2));
        let mut rounds = Vec::with_capacity(schedule.rounds());
        for (i, ch) in schedule.channels() {
            let joint = state.message_joint(&ch);
            let mut gamma = [[0.0; 2]; 2];
            let mut information = 0.0;
            let mut second_moment = 0.0;
            let mut conditional_mean = [0.0; 2];
            for v in 0..2 {
                let den = joint[v][0] + joint[v][1];
                if den.base <= 0.0 {
                    return Err(Error::DegenerateSchedule("conditioning event has zero mass"));
                }
                for u in 0..2 {
                    let num = joint[v][u];
                    let g = if num.base > 0.0 {
                        num.slope / num.base - den.slope / den.base
                    } else if num.slope == 0.0 {
                        0.0
                    } else {
                        return Err(Error::DegenerateSchedule("message with zero mass has nonzero slope"));
                    };
                    gamma[v][u] = g;
                    information += g * num.slope;
                    second_moment += g * g * num.base;
                    conditional_mean[v] += g * num.base / den.base;
                }
            }
            rounds.push(RoundScores {
                round: i,
                refiner: ch.refiner(),
                gamma,
                information,
                second_moment,
                conditional_mean,
            });
            state = state.advance(&ch);
        }
        Ok(ScoreTable { m1, m2, rounds })
    }

    pub fn for_family(family: &BernoulliFamily, schedule: &Schedule) -> Result<Self> {
        Self::build(family.m1(), family.m2(), schedule)
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    pub fn rounds(&self) -> &[RoundScores] {
        &self.rounds
    }

    /// `Gamma_i(u | v)` for 1-based round `i`.
    pub fn gamma(&self, i: usize, u: usize, v: usize) -> f64 {
        self.rounds[i - 1].gamma[v][u]
    }

    /// Rounds whose scores `estimator` collects.
    fn scored_by(&self, estimator: Party) -> impl Iterator<Item = &RoundScores> {
        self.rounds.iter().filter(move |r| r.refiner != estimator)
    }

    /// Per-sample normalizer `I / n` of the given party's estimator.
    pub fn normalizer(&self, estimator: Party) -> f64 {
        self.scored_by(estimator).map(|r| r.information).sum()
    }

    /// The same quantity computed as a sum of second moments.
    pub fn second_moment(&self, estimator: Party) -> f64 {
        self.scored_by(estimator).map(|r| r.second_moment).sum()
    }

    pub fn is_degenerate(&self, estimator: Party) -> bool {
        !(self.normalizer(estimator) > 0.0)
    }

    /// `Gamma^B` (for Bob's state) or `Gamma^A` (for Alice's).
    pub fn statistic(&self, state: &SessionState) -> Result<f64> {
        if state.rounds_done() != self.rounds.len() {
            return Err(Error::LengthMismatch { expected: self.rounds.len(), got: state.rounds_done() });
        }
        let scored: Vec<&RoundScores> = self.scored_by(state.party()).collect();
        // Sum per (v, absorbed_at) class, then weight by class counts.
        let r = self.rounds.len();
        let mut counts = alloc::vec![[0u64; 2]; r + 2];
        for (l, &v) in state.samples().iter().enumerate() {
            let a = state.absorbed_at(l).unwrap_or(r + 1);
            counts[a][v as usize] += 1;
        }
        let mut total = 0.0;
        for (a, row) in counts.iter().enumerate().skip(1) {
            for v in 0..2 {
                if row[v] == 0 {
                    continue;
                }
                let mut s = 0.0;
                for rs in scored.iter().filter(|rs| rs.round <= a) {
                    s += rs.gamma[v][(rs.round == a) as usize];
                }
                total += s * row[v] as f64;
            }
        }
        Ok(total)
    }

    pub fn estimate(&self, state: &SessionState, delta_max: f64) -> Result<EstimateReport> {
        let normalizer = self.normalizer(state.party()) * state.n() as f64;
        if !(normalizer > 0.0) {
            return Err(Error::DegenerateSchedule("normalizer is zero"));
        }
        let statistic = self.statistic(state)?;
        Ok(EstimateReport {
            delta_hat: statistic / normalizer,
            statistic,
            normalizer,
            predicted_mse: (1.0 + delta_max) / normalizer,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateReport {
    pub delta_hat: f64,
    pub statistic: f64,
    /// `I`, already multiplied by `n`.
    pub normalizer: f64,
    /// `(1 + delta_max) / I`.
    pub predicted_mse: f64,
}

/// Result of one seeded Bernoulli trial.
#[derive(Clone, Debug)]
pub struct BernoulliTrial {
    pub bob: EstimateReport,
    pub alice: Option<EstimateReport>,
    pub bits: usize,
}

/// Samples `n` pairs, runs a session and estimates with both parties.
///
/// The samples and the common randomness come from independent seeds
/// derived from `(seed, trial)`.
#[allow(clippy::too_many_arguments)]
pub fn bernoulli_trial(
    family: &BernoulliFamily,
    schedule: &Schedule,
    table: &ScoreTable,
    n: usize,
    seed: u64,
    trial: u64,
    policy: SearchPolicy,
    delta_max: f64,
) -> Result<BernoulliTrial> {
    let (xs, ys) = trial_samples(family, n, seed, trial);
    let session = run_session(&xs, &ys, schedule, trial_codebook(seed, trial, policy))?;
    let bob = table.estimate(&session.bob, delta_max)?;
    let alice = if table.is_degenerate(Party::Alice) { None } else { Some(table.estimate(&session.alice, delta_max)?) };
    Ok(BernoulliTrial { bob, alice, bits: session.transcript.bit_count() })
}

/// The `n` sample pairs of trial `trial` under base seed `seed`.
pub fn trial_samples(family: &BernoulliFamily, n: usize, seed: u64, trial: u64) -> (Vec<u8>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SEED_DOMAIN_SAMPLES, trial));
    family.sample(n, &mut rng)
}

/// A fresh codebook on the common randomness of trial `trial`.
pub fn trial_codebook(seed: u64, trial: u64, policy: SearchPolicy) -> Codebook {
    Codebook::new(SharedRandomness::new(derive_seed(seed, SEED_DOMAIN_COMMON, trial)), policy)
}

/// Monte Carlo mean of `Gamma^B / (delta I^B)` with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityCheck {
    pub ratio: f64,
    pub std_err: f64,
    pub trials: usize,
}

/// Checks `E[Gamma^B] = delta I^B` by simulation.
pub fn mean_statistic_identity_check(
    family: &BernoulliFamily,
    schedule: &Schedule,
    n: usize,
    trials: usize,
    seed: u64,
    policy: SearchPolicy,
) -> Result<IdentityCheck> {
    let delta = family.delta();
    if delta == 0.0 {
        return Err(Error::Domain { name: "delta", value: delta });
    }
    if trials < 2 {
        return Err(Error::Domain { name: "trials", value: trials as f64 });
    }
    let table = ScoreTable::for_family(family, schedule)?;
    let mut ratios = Vec::with_capacity(trials);
    for t in 0..trials {
        let out = bernoulli_trial(family, schedule, &table, n, seed, t as u64, policy, delta.max(0.0))?;
        ratios.push(out.bob.statistic / (delta * out.bob.normalizer));
    }
    let (mean, sd) = mean_sd(&ratios);
    Ok(IdentityCheck { ratio: mean, std_err: sd / libm::sqrt(trials as f64), trials })
}

/// Sample mean and (n - 1)-normalized standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var))
}

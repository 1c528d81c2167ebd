//! The delta-parameterized 2x2 joint law and the laws the protocol induces on
//! its all-zero branch.
//!
//! Every quantity is stored as a `(base, slope)` pair: its value at
//! `delta = 0` and its exact derivative in `delta`. The joint law is affine in
//! `delta` and the protocol channels do not depend on `delta`, so all
//! zero-branch masses stay affine and score functions come out exact.

use rand_core::RngCore;

use crate::error::{domain, Error, Result};
use crate::math;

pub type Matrix2 = [[f64; 2]; 2];

/// Which side of the protocol a quantity belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Party {
    /// Observes `X`; refines in odd rounds.
    Alice,
    /// Observes `Y`; refines in even rounds.
    Bob,
}

impl Party {
    /// The party refining in 1-based round `i`.
    pub fn refiner_of_round(i: usize) -> Party {
        if i % 2 == 1 {
            Party::Alice
        } else {
            Party::Bob
        }
    }

    pub fn other(self) -> Party {
        match self {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Alice,
        }
    }
}

/// A scalar `base + delta * slope`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Affine {
    pub base: f64,
    pub slope: f64,
}

impl Affine {
    pub const ZERO: Affine = Affine { base: 0.0, slope: 0.0 };

    pub fn new(base: f64, slope: f64) -> Self {
        Affine { base, slope }
    }

    pub fn at(self, delta: f64) -> f64 {
        self.base + delta * self.slope
    }

    pub fn scale(self, k: f64) -> Self {
        Affine::new(self.base * k, self.slope * k)
    }
}

impl core::ops::Add for Affine {
    type Output = Affine;
    fn add(self, rhs: Affine) -> Affine {
        Affine::new(self.base + rhs.base, self.slope + rhs.slope)
    }
}

/// Value and exact derivative at `delta = 0` of the ratio `num / den`.
pub fn ratio_at_zero(num: Affine, den: Affine) -> Result<(f64, f64)> {
    if den.base <= 0.0 {
        return Err(Error::ZeroMass);
    }
    let value = num.base / den.base;
    let slope = (num.slope * den.base - num.base * den.slope) / (den.base * den.base);
    Ok((value, slope))
}

/// A 2x2 joint law written as `base + delta * slope`, indexed `[x][y]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineJoint2x2 {
    pub base: Matrix2,
    pub slope: Matrix2,
}

impl AffineJoint2x2 {
    pub fn entry(&self, x: usize, y: usize) -> Affine {
        Affine::new(self.base[x][y], self.slope[x][y])
    }

    pub fn evaluate(&self, delta: f64) -> Matrix2 {
        let mut out = [[0.0; 2]; 2];
        for (x, row) in out.iter_mut().enumerate() {
            for (y, cell) in row.iter_mut().enumerate() {
                *cell = self.entry(x, y).at(delta);
            }
        }
        out
    }

    /// Total mass, as an affine function of delta.
    pub fn mass(&self) -> Affine {
        (0..2).flat_map(|x| (0..2).map(move |y| (x, y))).fold(Affine::ZERO, |acc, (x, y)| acc + self.entry(x, y))
    }

    fn scale_row(mut self, x: usize, k: f64) -> Self {
        for y in 0..2 {
            self.base[x][y] *= k;
            self.slope[x][y] *= k;
        }
        self
    }

    fn scale_col(mut self, y: usize, k: f64) -> Self {
        for x in 0..2 {
            self.base[x][y] *= k;
            self.slope[x][y] *= k;
        }
        self
    }
}

/// The biased Bernoulli family: `P(X=0) = 1/m1`, `P(Y=0) = 1/m2` and
/// `P(X=0, Y=0) = (1 + delta) / (m1 m2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BernoulliFamily {
    m1: f64,
    m2: f64,
    delta: f64,
}

impl BernoulliFamily {
    pub fn new(m1: f64, m2: f64, delta: f64) -> Result<Self> {
        // NaN fails both comparisons below.
        if !(m1 > 10.0 && m1.is_finite()) {
            return Err(domain("m1", m1));
        }
        if !(m2 > 10.0 && m2.is_finite()) {
            return Err(domain("m2", m2));
        }
        let hi = m1.min(m2) - 1.0;
        if !(delta >= -1.0 && delta <= hi) {
            return Err(domain("delta", delta));
        }
        Ok(BernoulliFamily { m1, m2, delta })
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Same marginals, different correlation parameter.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        BernoulliFamily::new(self.m1, self.m2, delta)
    }

    /// The affine representation of the joint law.
    pub fn joint(&self) -> AffineJoint2x2 {
        affine_joint(self.m1, self.m2)
    }

    /// The joint matrix at this family's delta, indexed `[x][y]`.
    pub fn matrix(&self) -> Matrix2 {
        self.joint().evaluate(self.delta)
    }

    /// Draws `n` i.i.d. pairs. Returns `(xs, ys)` with entries in `{0, 1}`.
    pub fn sample<R: RngCore + ?Sized>(&self, n: usize, rng: &mut R) -> (alloc::vec::Vec<u8>, alloc::vec::Vec<u8>) {
        let p = self.matrix();
        let c00 = p[0][0];
        let c01 = c00 + p[0][1];
        let c10 = c01 + p[1][0];
        let mut xs = alloc::vec::Vec::with_capacity(n);
        let mut ys = alloc::vec::Vec::with_capacity(n);
        for _ in 0..n {
            let u = math::unit_f64(rng.next_u64());
            let (x, y) = if u < c00 {
                (0, 0)
            } else if u < c01 {
                (0, 1)
            } else if u < c10 {
                (1, 0)
            } else {
                (1, 1)
            };
            xs.push(x);
            ys.push(y);
        }
        (xs, ys)
    }
}

/// The affine joint for marginals `(1/m1, 1/m2)` without any range checks on
/// `m1, m2`; used where the caller has validated them already.
pub(crate) fn affine_joint(m1: f64, m2: f64) -> AffineJoint2x2 {
    let k = 1.0 / (m1 * m2);
    AffineJoint2x2 {
        base: [[k, (1.0 - 1.0 / m2) / m1], [(1.0 - 1.0 / m1) / m2, (1.0 - 1.0 / m1) * (1.0 - 1.0 / m2)]],
        slope: [[k, -k], [-k, k]],
    }
}

/// The per-round message channel on the not-yet-absorbed branch.
///
/// The refining party's zeros are always marked `U = 0`; its ones are marked
/// `U = 0` with probability `1/alpha`. Samples already absorbed stay at 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundChannel {
    alpha: f64,
    refiner: Party,
}

impl RoundChannel {
    /// `alpha = 1` is allowed and gives a channel that reveals nothing.
    pub fn new(alpha: f64, refiner: Party) -> Result<Self> {
        if !(alpha >= 1.0 && alpha.is_finite()) {
            return Err(domain("alpha", alpha));
        }
        Ok(RoundChannel { alpha, refiner })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn refiner(&self) -> Party {
        self.refiner
    }

    /// Rows `P(U | z = 0)`, `P(U | z = 1)` and the absorbed row.
    pub fn rows(&self) -> [[f64; 2]; 3] {
        let s = 1.0 / self.alpha;
        [[1.0, 0.0], [s, 1.0 - s], [0.0, 1.0]]
    }

    /// `P(U = 0 | z)` on the not-yet-absorbed branch.
    pub fn survival(&self, z: usize) -> f64 {
        if z == 0 {
            1.0
        } else {
            1.0 / self.alpha
        }
    }
}

/// The sub-normalized joint `P(X = x, Y = y, U^{i-1} = 0)` after `i - 1`
/// rounds, kept affine in delta.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZeroBranchState {
    joint0: AffineJoint2x2,
    round_index: usize,
}

/// Exact conditional message law `P(U_i = u | other = v, U^{i-1} = 0)` and its
/// delta-derivative at zero, both indexed `[v][u]`, where `v` is the sample
/// of the party that does not refine in this round.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionalAtZero {
    pub value: Matrix2,
    pub slope: Matrix2,
}

impl ZeroBranchState {
    /// State before round 1 (the all-zero branch is everything).
    pub fn initial(family: &BernoulliFamily) -> Self {
        Self::from_joint(family.joint())
    }

    pub fn from_joint(joint0: AffineJoint2x2) -> Self {
        ZeroBranchState { joint0, round_index: 0 }
    }

    pub fn joint0(&self) -> &AffineJoint2x2 {
        &self.joint0
    }

    /// Number of rounds already applied.
    pub fn round_index(&self) -> usize {
        self.round_index
    }

    /// `P(U^{i-1} = 0)` as an affine function of delta.
    pub fn mass(&self) -> Affine {
        self.joint0.mass()
    }

    /// `P(z = 0, U^{i-1} = 0)` for the given party's sample `z`.
    pub fn zero_mass_of(&self, party: Party) -> Affine {
        match party {
            Party::Alice => self.joint0.entry(0, 0) + self.joint0.entry(0, 1),
            Party::Bob => self.joint0.entry(0, 0) + self.joint0.entry(1, 0),
        }
    }

    /// Conditions on `U_i = 0`: scales the refiner's `1` row (odd rounds) or
    /// column (even rounds) by `1/alpha`.
    pub fn advance(&self, ch: &RoundChannel) -> Self {
        let s = ch.survival(1);
        let joint0 = match ch.refiner() {
            Party::Alice => self.joint0.scale_row(1, s),
            Party::Bob => self.joint0.scale_col(1, s),
        };
        ZeroBranchState { joint0, round_index: self.round_index + 1 }
    }

    /// `P(U_i = u, other = v, U^{i-1} = 0)` indexed `[v][u]`.
    pub fn message_joint(&self, ch: &RoundChannel) -> [[Affine; 2]; 2] {
        let mut out = [[Affine::ZERO; 2]; 2];
        for (v, row) in out.iter_mut().enumerate() {
            for z in 0..2 {
                let cell = match ch.refiner() {
                    Party::Alice => self.joint0.entry(z, v),
                    Party::Bob => self.joint0.entry(v, z),
                };
                let keep = ch.survival(z);
                row[0] = row[0] + cell.scale(keep);
                row[1] = row[1] + cell.scale(1.0 - keep);
            }
        }
        out
    }

    /// Exact conditional message law given the non-refining party's sample.
    pub fn conditional_at_zero(&self, ch: &RoundChannel) -> Result<ConditionalAtZero> {
        let joint = self.message_joint(ch);
        let mut value = [[0.0; 2]; 2];
        let mut slope = [[0.0; 2]; 2];
        for v in 0..2 {
            let den = joint[v][0] + joint[v][1];
            for u in 0..2 {
                let (p, dp) = ratio_at_zero(joint[v][u], den)?;
                value[v][u] = p;
                slope[v][u] = dp;
            }
        }
        Ok(ConditionalAtZero { value, slope })
    }
}

//! Shared randomness and codeword selection.
//!
//! Both parties hold the same 64-bit seed. It is expanded into a ChaCha8 key
//! (`ChaCha8Rng::seed_from_u64`, the portable PCG32-based expansion in
//! `rand_core` 0.6). Every random quantity is read from a keyed ChaCha8
//! stream at a fixed position:
//!
//! | stream id (u64)                      | contents                          |
//! |--------------------------------------|-----------------------------------|
//! | `0x01 << 56 \| round << 40 \| j`     | codebook row `V_{round, j}`       |
//! | `0x02 << 56 \| round << 40`          | free bits of a lazily drawn row   |
//! | `0x03 << 56 \| round << 40`          | lazily drawn codeword index       |
//! | `0x10 << 56 \| domain << 40 \| idx`  | derived seeds ([`derive_seed`])   |
//!
//! Entry `l` of a row is the little-endian `u64` at word position `2 l`
//! (ChaCha 32-bit words). It maps to the bit `1` iff it is at least
//! `floor(2^64 / alpha)`, so `P(V = 0) = 1/alpha` up to `2^-64`.
//!
//! # Codeword selection
//!
//! The sender needs the first row `j >= 1` whose entries vanish on its zero
//! set `A0`. That index is geometric with success probability
//! `alpha^-|A0|`, so scanning rows costs about `alpha^|A0|` row reads, which
//! is hopeless once `|A0|` reaches the hundreds. [`Codebook`] therefore has
//! two engines:
//!
//! * **literal**: scans the keyed rows. Either party can rebuild a row from
//!   the seed and its index alone.
//! * **lazy**: samples the codebook only where anybody looks at it. The
//!   index is drawn from its geometric law. The selected row is zero on
//!   `A0`, and its other active entries are fresh `Bernoulli(1 - 1/alpha)`
//!   bits. No other row is ever read, so the pair (index, row) has exactly
//!   the law of the literal scan. The realized row is kept in the
//!   session's [`Codebook`]; the receiving party reads it from there.
//!
//! `SearchPolicy::Auto` uses the literal engine when the expected number of
//! rows is within budget and the lazy engine otherwise.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::math;

const DOMAIN_ROW: u64 = 0x01;
const DOMAIN_LAZY_ROW: u64 = 0x02;
const DOMAIN_LAZY_INDEX: u64 = 0x03;
const DOMAIN_DERIVE: u64 = 0x10;

/// Largest codeword index the literal engine can address.
pub const MAX_LITERAL_INDEX: u64 = (1 << 40) - 1;

/// Below this many bits of `-log2 p`, geometric indices are drawn by exact
/// inversion in `f64`.
const EXACT_GEOMETRIC_BITS: f64 = 40.0;

/// Leading bits of a huge geometric index taken from the exponential
/// quantile; the remaining low bits are uniform.
const LEADING_BITS: i64 = 32;

fn stream_id(domain: u64, round: usize, j: u64) -> u64 {
    debug_assert!(round < 1 << 16 && j <= MAX_LITERAL_INDEX);
    (domain << 56) | ((round as u64) << 40) | j
}

/// `floor(2^64 / alpha)`, or `None` when `alpha == 1` (every entry is 0).
pub fn zero_threshold(alpha: f64) -> Option<u64> {
    if alpha <= 1.0 {
        None
    } else {
        Some(((1.0 / alpha) * 18_446_744_073_709_551_616.0) as u64)
    }
}

#[inline]
fn word_to_bit(word: u64, threshold: Option<u64>) -> bool {
    matches!(threshold, Some(t) if word >= t)
}

/// The common randomness of one session: a seed and the key expanded from it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SharedRandomness {
    seed: u64,
    key: [u8; 32],
}

impl SharedRandomness {
    pub fn new(seed: u64) -> Self {
        let key = ChaCha8Rng::seed_from_u64(seed).get_seed();
        SharedRandomness { seed, key }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn stream(&self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(id);
        rng
    }

    /// The codebook entry `V_{round, j}(l)`.
    pub fn codebook_bit(&self, round: usize, j: u64, l: u32, alpha: f64) -> bool {
        let mut rng = self.stream(stream_id(DOMAIN_ROW, round, j));
        rng.set_word_pos(2 * l as u128);
        word_to_bit(rng.next_u64(), zero_threshold(alpha))
    }

    /// `V_{round, j}(l)` for every `l` in `positions` (ascending).
    pub fn codebook_row(&self, round: usize, j: u64, positions: &[u32], alpha: f64) -> Vec<bool> {
        let rng = self.stream(stream_id(DOMAIN_ROW, round, j));
        read_positions(rng, positions, zero_threshold(alpha))
    }
}

/// Reads the words at `2 l` for ascending `l`, skipping ahead sequentially
/// across short gaps.
fn read_positions(mut rng: ChaCha8Rng, positions: &[u32], threshold: Option<u64>) -> Vec<bool> {
    let mut out = Vec::with_capacity(positions.len());
    let mut next = 0u32;
    for &l in positions {
        debug_assert!(l >= next);
        if l - next > 64 {
            rng.set_word_pos(2 * l as u128);
        } else {
            for _ in next..l {
                rng.next_u64();
            }
        }
        out.push(word_to_bit(rng.next_u64(), threshold));
        next = l + 1;
    }
    out
}

/// Derives an independent 64-bit seed for `(domain, index)` from `base`.
/// Used for per-trial seeds, so the same trial index gives the same seed
/// in every mode.
pub fn derive_seed(base: u64, domain: u16, index: u64) -> u64 {
    let shared = SharedRandomness::new(base);
    let mut rng = shared.stream((DOMAIN_DERIVE << 56) | ((domain as u64) << 40) | (index & MAX_LITERAL_INDEX));
    rng.set_word_pos(2 * (index >> 40) as u128);
    rng.next_u64()
}

/// How the sender finds its codeword index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SearchPolicy {
    /// Always scan rows; give up after `max_rows`.
    Literal { max_rows: u64 },
    /// Always sample lazily.
    Lazy,
    /// Scan when `alpha^|A0| <= literal_row_budget`, otherwise sample lazily.
    Auto { literal_row_budget: f64 },
}

impl Default for SearchPolicy {
    fn default() -> Self {
        SearchPolicy::Auto { literal_row_budget: 4096.0 }
    }
}

/// Which engine produced a round's codeword.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    Literal,
    Lazy,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct RealizedRow {
    index: BigUint,
    /// Bitset over sample positions; set bits are `V = 1`.
    ones: Vec<u64>,
}

impl RealizedRow {
    fn get(&self, l: u32) -> bool {
        let l = l as usize;
        self.ones.get(l / 64).is_some_and(|w| w >> (l % 64) & 1 == 1)
    }
}

/// The session's view of the codebook: the shared randomness plus any rows
/// that were realized lazily.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    shared: SharedRandomness,
    policy: SearchPolicy,
    realized: BTreeMap<usize, RealizedRow>,
}

impl Codebook {
    pub fn new(shared: SharedRandomness, policy: SearchPolicy) -> Self {
        Codebook { shared, policy, realized: BTreeMap::new() }
    }

    pub fn shared(&self) -> &SharedRandomness {
        &self.shared
    }

    pub fn policy(&self) -> SearchPolicy {
        self.policy
    }

    /// The engine the policy picks for a zero set of size `zeros`.
    pub fn engine_for(&self, alpha: f64, zeros: usize) -> Engine {
        match self.policy {
            SearchPolicy::Literal { .. } => Engine::Literal,
            SearchPolicy::Lazy => Engine::Lazy,
            SearchPolicy::Auto { literal_row_budget } => {
                if zeros as f64 * math::log2(alpha) <= math::log2(literal_row_budget) {
                    Engine::Literal
                } else {
                    Engine::Lazy
                }
            }
        }
    }

    /// Sender side: returns the least index `j >= 1` whose row vanishes on
    /// the sender's zero set `{l in active : own[l] == 0}`.
    ///
    /// `active` must be ascending.
    pub fn select(&mut self, round: usize, alpha: f64, active: &[u32], own: &[u8]) -> Result<BigUint> {
        let zeros: Vec<u32> = active.iter().copied().filter(|&l| own[l as usize] == 0).collect();
        match self.engine_for(alpha, zeros.len()) {
            Engine::Literal => {
                let max_rows = match self.policy {
                    SearchPolicy::Literal { max_rows } => max_rows.min(MAX_LITERAL_INDEX),
                    _ => MAX_LITERAL_INDEX,
                };
                self.realized.remove(&round);
                literal_search(&self.shared, round, alpha, &zeros, max_rows).map(BigUint::from)
            }
            Engine::Lazy => {
                let index = self.draw_lazy_index(round, alpha, zeros.len());
                let row = self.draw_lazy_row(round, alpha, active, own);
                self.realized.insert(round, RealizedRow { index: index.clone(), ones: row });
                Ok(index)
            }
        }
    }

    fn draw_lazy_index(&self, round: usize, alpha: f64, zeros: usize) -> BigUint {
        let mut rng = self.shared.stream(stream_id(DOMAIN_LAZY_INDEX, round, 0));
        sample_geometric_index(zeros as f64 * math::log2(alpha), &mut rng)
    }

    fn draw_lazy_row(&self, round: usize, alpha: f64, active: &[u32], own: &[u8]) -> Vec<u64> {
        let threshold = zero_threshold(alpha);
        let mut rng = self.shared.stream(stream_id(DOMAIN_LAZY_ROW, round, 0));
        let mut ones = alloc::vec![0u64; own.len().div_ceil(64)];
        let mut next = 0u32;
        for &l in active {
            for _ in next..l {
                rng.next_u64();
            }
            let word = rng.next_u64();
            next = l + 1;
            if own[l as usize] != 0 && word_to_bit(word, threshold) {
                ones[l as usize / 64] |= 1 << (l % 64);
            }
        }
        ones
    }

    /// Receiver (and sender) side: the row `V_{round, index}` restricted to
    /// `active` (ascending).
    pub fn row_bits(&self, round: usize, index: &BigUint, alpha: f64, active: &[u32]) -> Result<Vec<bool>> {
        if let Some(row) = self.realized.get(&round) {
            if &row.index == index {
                return Ok(active.iter().map(|&l| row.get(l)).collect());
            }
        }
        match index.to_u64() {
            Some(j) if (1..=MAX_LITERAL_INDEX).contains(&j) => Ok(self.shared.codebook_row(round, j, active, alpha)),
            _ => Err(Error::UnrealizedRow { round }),
        }
    }
}

fn literal_search(shared: &SharedRandomness, round: usize, alpha: f64, zeros: &[u32], max_rows: u64) -> Result<u64> {
    let threshold = zero_threshold(alpha);
    'rows: for j in 1..=max_rows {
        let mut rng = shared.stream(stream_id(DOMAIN_ROW, round, j));
        for &l in zeros {
            rng.set_word_pos(2 * l as u128);
            if word_to_bit(rng.next_u64(), threshold) {
                continue 'rows;
            }
        }
        return Ok(j);
    }
    Err(Error::SearchOverflow { round, limit: max_rows })
}

/// Draws from the geometric law on `{1, 2, ...}` with success probability
/// `p = 2^-log2_inv_p`.
///
/// For `p >= 2^-40` this is exact inversion, `ceil(ln W / ln(1 - p))`. For
/// smaller `p` it uses the exponential limit `ceil(E / p)`, `E ~ Exp(1)`,
/// whose law is within `O(p)` of the geometric one in total variation. Only
/// the leading 32 bits are taken from the quantile; the remaining low bits
/// are uniform, since `log2(E/p)` is known only to `f64` precision.
pub fn sample_geometric_index<R: RngCore + ?Sized>(log2_inv_p: f64, rng: &mut R) -> BigUint {
    if log2_inv_p <= 0.0 {
        return BigUint::from(1u8);
    }
    // W in (0, 1].
    let w = 1.0 - math::unit_f64(rng.next_u64());
    if log2_inv_p <= EXACT_GEOMETRIC_BITS {
        let p = math::exp2(-log2_inv_p);
        let j = math::ceil(math::ln(w) / math::ln_1p(-p)).max(1.0);
        return BigUint::from(j as u64);
    }
    let e = -math::ln(w);
    if e == 0.0 {
        return BigUint::from(1u8);
    }
    let log2_j = math::log2(e) + log2_inv_p;
    if log2_j < 60.0 {
        return BigUint::from((math::ceil(math::exp2(log2_j)) as u64).max(1));
    }
    let exponent = math::floor(log2_j);
    let frac = log2_j - exponent;
    let exponent = exponent as i64;
    let lead = math::exp2(frac + (LEADING_BITS - 1) as f64) as u64;
    let low_bits = (exponent - (LEADING_BITS - 1)) as u64;
    let mut j = BigUint::from(lead) << low_bits;
    j += uniform_bits(low_bits, rng);
    j
}

fn uniform_bits<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    let digits = bits.div_ceil(32) as usize;
    let mut words: Vec<u32> = (0..digits).map(|_| rng.next_u32()).collect();
    let spare = digits as u64 * 32 - bits;
    if spare > 0 {
        if let Some(top) = words.last_mut() {
            *top &= u32::MAX >> spare;
        }
    }
    BigUint::from_slice(&words)
}

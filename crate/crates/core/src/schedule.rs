//! Refinement-factor schedules and the communication / information bounds
//! they guarantee.
//!
//! Information quantities are in nats and communication is in bits. The
//! `comm_*` fields of [`BoundReport`] use natural logarithms; multiply by
//! `log2(e)` to get bits per sample.

use alloc::vec::Vec;

use crate::error::{domain, Error, Result};
use crate::family::{affine_joint, Party, RoundChannel, ZeroBranchState};
use crate::math;

/// Relative slack allowed when checking the product constraints, so that the
/// built-in schedules (whose products equal `m/10` up to rounding) validate.
const PRODUCT_SLACK: f64 = 1e-12;

/// Per-round refinement factors `alpha_1, ..., alpha_r`. Round `i` (1-based)
/// is refined by Alice when odd and by Bob when even.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    alphas: Vec<f64>,
}

impl Schedule {
    /// Every factor must be finite and at least 1. A factor of exactly 1 is
    /// an idle round.
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidSchedule("at least one round is required"));
        }
        if alphas.len() > u16::MAX as usize {
            return Err(Error::InvalidSchedule("too many rounds"));
        }
        if let Some(&bad) = alphas.iter().find(|a| !(**a >= 1.0 && a.is_finite())) {
            return Err(domain("alpha", bad));
        }
        Ok(Schedule { alphas })
    }

    /// One round with `alpha_1 = m1 / 10`.
    pub fn one_way(m1: f64) -> Result<Self> {
        if !(m1 > 10.0 && m1.is_finite()) {
            return Err(domain("m1", m1));
        }
        Schedule::new(alloc::vec![m1 / 10.0])
    }

    /// The tetration schedule for `m = min(m1, m2)`.
    ///
    /// `r0` is the least integer with `exp(T(r0) - 1) >= m/10`, where `T` is
    /// iterated exponentiation of 2 (`T(0) = 1`, `T(k) = 2^T(k-1)`). Rounds
    /// come in pairs: pair `k < r0` uses `exp(T(k) - T(k-1))` and the last
    /// pair uses `(m/10) exp(1 - T(r0-1))`, so both the odd and the even
    /// products equal `m/10`.
    pub fn tetration(m: f64) -> Result<Self> {
        if !(m > 10.0 && m.is_finite()) {
            return Err(domain("m", m));
        }
        let target = m / 10.0;
        let mut r0 = 1;
        while math::exp(tower_of_twos(r0) - 1.0) < target {
            r0 += 1;
        }
        let mut alphas = Vec::with_capacity(2 * r0);
        for k in 1..r0 {
            let a = math::exp(tower_of_twos(k) - tower_of_twos(k - 1));
            alphas.push(a);
            alphas.push(a);
        }
        let last = target * math::exp(1.0 - tower_of_twos(r0 - 1));
        alphas.push(last);
        alphas.push(last);
        Schedule::new(alphas)
    }

    pub fn rounds(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Factor of 1-based round `i`.
    pub fn alpha(&self, i: usize) -> f64 {
        self.alphas[i - 1]
    }

    /// The message channel of 1-based round `i`.
    pub fn channel(&self, i: usize) -> RoundChannel {
        RoundChannel::new(self.alpha(i), Party::refiner_of_round(i)).expect("validated at construction")
    }

    /// Iterates `(round, channel)` in protocol order.
    pub fn channels(&self) -> impl Iterator<Item = (usize, RoundChannel)> + '_ {
        (1..=self.rounds()).map(move |i| (i, self.channel(i)))
    }

    pub fn odd_product(&self) -> f64 {
        self.alphas.iter().step_by(2).product()
    }

    pub fn even_product(&self) -> f64 {
        self.alphas.iter().skip(1).step_by(2).product()
    }

    /// Checks `prod_odd alpha <= m1/10` and `prod_even alpha <= m2/10`.
    pub fn validate_for(&self, m1: f64, m2: f64) -> Result<()> {
        if !(m1 > 10.0) {
            return Err(domain("m1", m1));
        }
        if !(m2 > 10.0) {
            return Err(domain("m2", m2));
        }
        if self.odd_product() > m1 / 10.0 * (1.0 + PRODUCT_SLACK) {
            return Err(Error::InvalidSchedule("odd-round product exceeds m1/10"));
        }
        if self.even_product() > m2 / 10.0 * (1.0 + PRODUCT_SLACK) {
            return Err(Error::InvalidSchedule("even-round product exceeds m2/10"));
        }
        Ok(())
    }

    /// Communication and information bounds for this schedule; see [`BoundReport`].
    pub fn predicted_bounds(&self, m1: f64, m2: f64) -> BoundReport {
        let mut comm_odd = 0.0;
        let mut comm_even = 0.0;
        // Running products of the other parity's factors before round i.
        let mut odd_before = 1.0;
        let mut even_before = 1.0;
        for (idx, &a) in self.alphas.iter().enumerate() {
            if idx % 2 == 0 {
                comm_odd += math::ln(a) / even_before;
                odd_before *= a;
            } else {
                comm_even += math::ln(a) / odd_before;
                even_before *= a;
            }
        }
        BoundReport {
            comm_odd: 1.1 / m1 * comm_odd,
            comm_even: 1.1 / m2 * comm_even,
            info_odd: self.odd_product() / (5.0 * m1 * m1 * m2),
            info_even: self.even_product() / (5.0 * m1 * m2 * m2),
        }
    }

    /// Exact per-sample rates `sum_i P0(z = 0, U^{i-1} = 0) ln alpha_i` for
    /// the rounds refined by `party` (the left-hand sides that
    /// [`BoundReport::comm_odd`] / [`BoundReport::comm_even`] bound).
    pub fn exact_comm_rate(&self, m1: f64, m2: f64, party: Party) -> f64 {
        let mut state = ZeroBranchState::from_joint(affine_joint(m1, m2));
        let mut total = 0.0;
        for (_, ch) in self.channels() {
            if ch.refiner() == party {
                total += state.zero_mass_of(party).base * math::ln(ch.alpha());
            }
            state = state.advance(&ch);
        }
        total
    }

    /// Formats as `{r, [a1, a2, ...]}` with 17 significant digits per factor.
    pub fn to_config_string(&self) -> alloc::string::String {
        use core::fmt::Write;
        let mut s = alloc::string::String::new();
        let _ = write!(s, "{{{}, [", self.rounds());
        for (i, a) in self.alphas.iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            let _ = write!(s, "{:.16e}", a);
        }
        s.push_str("]}");
        s
    }

    /// Parses the format produced by [`Schedule::to_config_string`].
    pub fn from_config_str(text: &str) -> Result<Self> {
        let t = text.trim();
        let inner = t
            .strip_prefix('{')
            .and_then(|t| t.strip_suffix('}'))
            .ok_or(Error::InvalidSchedule("expected `{r, [...]}`"))?;
        let (r_part, rest) = inner.split_once(',').ok_or(Error::InvalidSchedule("missing round count"))?;
        let r: usize = r_part.trim().parse().map_err(|_| Error::InvalidSchedule("round count is not an integer"))?;
        let list = rest
            .trim()
            .strip_prefix('[')
            .and_then(|t| t.strip_suffix(']'))
            .ok_or(Error::InvalidSchedule("expected a bracketed factor list"))?;
        let alphas = list
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<core::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::InvalidSchedule("unparsable factor"))?;
        if alphas.len() != r {
            return Err(Error::InvalidSchedule("round count does not match factor list"));
        }
        Schedule::new(alphas)
    }
}

/// `T(k)`: 1, 2, 4, 16, 65536, then infinity.
pub fn tower_of_twos(k: usize) -> f64 {
    let mut v = 1.0f64;
    for _ in 0..k {
        v = math::exp2(v);
    }
    v
}

/// Communication and information guarantees of a schedule.
///
/// * `comm_odd = (1.1/m1) sum_odd ln(alpha_i) prod_{even j<i} 1/alpha_j`,
///   an upper bound on `sum_odd P0(X=0, U^{i-1}=0) ln alpha_i` (nats/sample);
///   `comm_even` is the mirror image with `m2`.
/// * `info_odd = prod_odd alpha_j / (5 m1^2 m2)`, a lower bound on
///   `lim delta^-2 sum_odd I(U_i; Y | U^{i-1})` (nats); `info_even` mirrors it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundReport {
    pub comm_odd: f64,
    pub comm_even: f64,
    pub info_odd: f64,
    pub info_even: f64,
}

/// Expected-transcript-length bound for the one-round schedule
/// `alpha_1 = m1/10`: `2.2 (1+delta) n / m1 * log2(m1/10) + 1` bits.
pub fn one_way_comm_bound_bits(n: usize, m1: f64, delta: f64) -> f64 {
    2.2 * (1.0 + delta) * n as f64 / m1 * math::log2(m1 / 10.0) + 1.0
}

/// Expected-transcript-length bound for the tetration schedule:
/// `6 (1+delta) n (1/m1 + 1/m2) log2(e) + (r+1)/2` bits.
pub fn tetration_comm_bound_bits(n: usize, m1: f64, m2: f64, delta: f64, rounds: usize) -> f64 {
    6.0 * (1.0 + delta) * n as f64 * (1.0 / m1 + 1.0 / m2) * core::f64::consts::LOG2_E + (rounds as f64 + 1.0) / 2.0
}

/// Mean-square-error bound for Bob's estimate under the one-way schedule:
/// `25 (1+delta) m1 m2 / n`.
pub fn one_way_mse_bound(n: usize, m1: f64, m2: f64, delta: f64) -> f64 {
    25.0 * (1.0 + delta) * m1 * m2 / n as f64
}

/// The two readings of the tetration-schedule MSE bound: the stated form
/// `25 (1+delta) m1 m2^2 / (n m)` and the derived form
/// `25 (1+delta) m1^2 m2 / (m n)`, with `m = min(m1, m2)`. They agree when
/// `m1 = m2`.
pub fn tetration_mse_bounds(n: usize, m1: f64, m2: f64, delta: f64) -> (f64, f64) {
    let m = m1.min(m2);
    let scale = 25.0 * (1.0 + delta) / (n as f64 * m);
    (scale * m1 * m2 * m2, scale * m1 * m1 * m2)
}

/// The larger of the two [`tetration_mse_bounds`] readings.
pub fn tetration_mse_bound(n: usize, m1: f64, m2: f64, delta: f64) -> f64 {
    let (a, b) = tetration_mse_bounds(n, m1, m2, delta);
    a.max(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_way_examples() {
        assert_eq!(Schedule::one_way(20.0).unwrap().alphas(), &[2.0]);
        assert_eq!(Schedule::one_way(100.0).unwrap().alphas(), &[10.0]);
        let s = Schedule::one_way(10.01).unwrap();
        assert!((s.alpha(1) - 1.001).abs() < 1e-12 && s.alpha(1) > 1.0);
        assert!(Schedule::one_way(10.0).is_err());
    }

    #[test]
    fn tetration_m100() {
        let s = Schedule::tetration(100.0).unwrap();
        let e = core::f64::consts::E;
        assert_eq!(s.rounds(), 4);
        let want = [e, e, 10.0 / e, 10.0 / e];
        for (a, w) in s.alphas().iter().zip(want) {
            assert!((a - w).abs() < 1e-14);
        }
        assert!((s.odd_product() - 10.0).abs() < 1e-13);
        assert!((s.even_product() - 10.0).abs() < 1e-13);
        s.validate_for(100.0, 100.0).unwrap();
    }

    #[test]
    fn tetration_m20() {
        let s = Schedule::tetration(20.0).unwrap();
        assert_eq!(s.alphas(), &[2.0, 2.0]);
    }

    #[test]
    fn tower_values() {
        assert_eq!(tower_of_twos(0), 1.0);
        assert_eq!(tower_of_twos(3), 16.0);
        assert_eq!(tower_of_twos(4), 65536.0);
        assert!(tower_of_twos(5).is_infinite());
    }

    #[test]
    fn validity_rejects_oversized_products() {
        let s = Schedule::new(alloc::vec![3.0, 1.5, 2.0]).unwrap();
        assert!(s.validate_for(50.0, 100.0).is_err());
        assert!(s.validate_for(60.0, 15.0).is_ok());
        assert!(s.validate_for(60.0, 14.0).is_err());
        assert!(Schedule::new(alloc::vec![]).is_err());
        assert!(Schedule::new(alloc::vec![0.5]).is_err());
    }

    #[test]
    fn idle_rounds_give_zero_bounds() {
        let s = Schedule::new(alloc::vec![1.0, 1.0, 1.0]).unwrap();
        let b = s.predicted_bounds(50.0, 50.0);
        assert_eq!(b.comm_odd, 0.0);
        assert_eq!(b.comm_even, 0.0);
        assert!(b.info_odd > 0.0);
    }

    #[test]
    fn config_string_round_trip() {
        let s = Schedule::tetration(1234.5).unwrap();
        let text = s.to_config_string();
        assert!(text.starts_with("{6, ["));
        assert_eq!(Schedule::from_config_str(&text).unwrap(), s);
        assert!(Schedule::from_config_str("{2, [1.5]}").is_err());
    }

    #[test]
    fn mse_bounds_agree_when_symmetric() {
        let (a, b) = tetration_mse_bounds(1000, 50.0, 50.0, 0.5);
        assert!((a - b).abs() < 1e-12 * a);
        let (a, b) = tetration_mse_bounds(1000, 50.0, 80.0, 0.5);
        assert!(a > b);
    }
}

//! Per-party session state, transcripts and the round loop.
//!
//! In round `i` the refining party (Alice for odd `i`, Bob for even `i`)
//! looks at the still-active samples `A = {l : U_{i-1}(l) = 0}`, picks the
//! first codebook row that vanishes on its own zeros in `A`, and sends the
//! row's index as an Elias gamma codeword. Both parties then set
//! `U_i(l)` to the row entry for `l` in `A`; inactive samples stay at 1.

use alloc::vec::Vec;

use num_bigint::BigUint;

use crate::elias::{gamma_decode, gamma_encode_into, gamma_len, BitString};
use crate::error::{Error, Result};
use crate::family::Party;
use crate::randomness::Codebook;
use crate::schedule::Schedule;

/// `absorbed_at` value of a sample that is still active.
const ACTIVE: u16 = u16::MAX;

/// One party's view of a session: its samples and, per sample, the round in
/// which `U` first became 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionState {
    party: Party,
    samples: Vec<u8>,
    absorbed_at: Vec<u16>,
    rounds_done: usize,
}

impl SessionState {
    /// `samples` must be 0/1 valued.
    pub fn new(party: Party, samples: Vec<u8>) -> Result<Self> {
        if samples.iter().any(|&s| s > 1) {
            return Err(Error::Domain { name: "sample", value: 2.0 });
        }
        if samples.len() > u32::MAX as usize {
            return Err(Error::Domain { name: "n", value: samples.len() as f64 });
        }
        let n = samples.len();
        Ok(SessionState { party, samples, absorbed_at: alloc::vec![ACTIVE; n], rounds_done: 0 })
    }

    pub fn party(&self) -> Party {
        self.party
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn rounds_done(&self) -> usize {
        self.rounds_done
    }

    /// The round in which sample `l` was absorbed, if any.
    pub fn absorbed_at(&self, l: usize) -> Option<usize> {
        match self.absorbed_at[l] {
            ACTIVE => None,
            i => Some(i as usize),
        }
    }

    /// Indices with `U_{rounds_done}(l) = 0`, ascending.
    pub fn active_set(&self) -> Vec<u32> {
        (0..self.absorbed_at.len() as u32).filter(|&l| self.absorbed_at[l as usize] == ACTIVE).collect()
    }

    /// `U_i(l)`; `U_0 = 0`. Panics if `i > rounds_done`.
    pub fn u(&self, i: usize, l: usize) -> bool {
        assert!(i <= self.rounds_done, "round {i} not played yet");
        self.absorbed_at(l).is_some_and(|a| a <= i)
    }

    pub fn u_vector(&self, i: usize) -> Vec<u8> {
        (0..self.n()).map(|l| self.u(i, l) as u8).collect()
    }

    /// Plays round `rounds_done + 1` with codeword index `index`.
    pub fn apply_codeword(&mut self, index: &BigUint, alpha: f64, codebook: &Codebook) -> Result<()> {
        let round = self.rounds_done + 1;
        if round >= ACTIVE as usize {
            return Err(Error::InvalidSchedule("too many rounds"));
        }
        let active = self.active_set();
        let row = codebook.row_bits(round, index, alpha, &active)?;
        for (&l, bit) in active.iter().zip(row) {
            if bit {
                self.absorbed_at[l as usize] = round as u16;
            }
        }
        self.rounds_done = round;
        Ok(())
    }
}

/// The codeword indices of a session and their concatenated Elias gamma
/// codewords.
///
/// Byte format: `r` as `u16` LE, `n` as `u32` LE, then the bit string, most
/// significant bit first, zero-padded to a byte boundary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transcript {
    n: u32,
    indices: Vec<BigUint>,
    bits: BitString,
}

impl Transcript {
    pub fn new(n: usize) -> Result<Self> {
        let n = u32::try_from(n).map_err(|_| Error::Domain { name: "n", value: n as f64 })?;
        Ok(Transcript { n, indices: Vec::new(), bits: BitString::new() })
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn rounds(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[BigUint] {
        &self.indices
    }

    pub fn bits(&self) -> &BitString {
        &self.bits
    }

    pub fn bit_count(&self) -> usize {
        self.bits.len()
    }

    pub fn round_bit_lengths(&self) -> Vec<u64> {
        self.indices.iter().map(gamma_len).collect()
    }

    pub fn push(&mut self, index: &BigUint) -> Result<()> {
        if self.indices.len() >= u16::MAX as usize {
            return Err(Error::InvalidSchedule("too many rounds"));
        }
        gamma_encode_into(index, &mut self.bits)?;
        self.indices.push(index.clone());
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(6 + self.bits.as_bytes().len());
        out.extend_from_slice(&(self.indices.len() as u16).to_le_bytes());
        out.extend_from_slice(&self.n.to_le_bytes());
        out.extend_from_slice(self.bits.as_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 6 {
            return Err(Error::MalformedTranscript("short header"));
        }
        let r = u16::from_le_bytes([bytes[0], bytes[1]]) as usize;
        let n = u32::from_le_bytes([bytes[2], bytes[3], bytes[4], bytes[5]]);
        let payload = &bytes[6..];
        let all = BitString::from_bytes(payload, payload.len() * 8)?;
        let mut cursor = all.cursor();
        let mut indices = Vec::with_capacity(r);
        for _ in 0..r {
            indices.push(gamma_decode(&mut cursor)?);
        }
        let used = cursor.position();
        if all.len() - used >= 8 {
            return Err(Error::MalformedTranscript("trailing bytes"));
        }
        if (used..all.len()).any(|i| all.get(i) == Some(true)) {
            return Err(Error::MalformedTranscript("nonzero padding"));
        }
        let bits = BitString::from_bytes(payload, used)?;
        Ok(Transcript { n, indices, bits })
    }
}

/// Both parties' final states, the transcript, and the codebook with any
/// lazily realized rows.
#[derive(Clone, Debug)]
pub struct Session {
    pub alice: SessionState,
    pub bob: SessionState,
    pub transcript: Transcript,
    pub codebook: Codebook,
}

/// Runs all rounds of `schedule` on the paired samples `xs`, `ys`.
///
/// The receiving party of each round only sees the transcript bits: it
/// decodes the newest codeword and applies it.
pub fn run_session(xs: &[u8], ys: &[u8], schedule: &Schedule, mut codebook: Codebook) -> Result<Session> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { expected: xs.len(), got: ys.len() });
    }
    if xs.is_empty() {
        return Err(Error::Domain { name: "n", value: 0.0 });
    }
    let mut alice = SessionState::new(Party::Alice, xs.to_vec())?;
    let mut bob = SessionState::new(Party::Bob, ys.to_vec())?;
    let mut transcript = Transcript::new(xs.len())?;
    for (i, ch) in schedule.channels() {
        let alpha = ch.alpha();
        let (sender, receiver) = match ch.refiner() {
            Party::Alice => (&mut alice, &mut bob),
            Party::Bob => (&mut bob, &mut alice),
        };
        let active = sender.active_set();
        let index = codebook.select(i, alpha, &active, sender.samples())?;
        let offset = transcript.bit_count();
        transcript.push(&index)?;
        sender.apply_codeword(&index, alpha, &codebook)?;
        debug_assert!(active.iter().all(|&l| sender.samples()[l as usize] == 1 || !sender.u(i, l as usize)));

        let mut cursor = transcript.bits().cursor_at(offset);
        let received = gamma_decode(&mut cursor)?;
        receiver.apply_codeword(&received, alpha, &codebook)?;
    }
    Ok(Session { alice, bob, transcript, codebook })
}

/// Rebuilds one party's final state from its samples and a transcript.
pub fn replay(
    party: Party,
    samples: &[u8],
    transcript: &Transcript,
    schedule: &Schedule,
    codebook: &Codebook,
) -> Result<SessionState> {
    if transcript.rounds() != schedule.rounds() {
        return Err(Error::LengthMismatch { expected: schedule.rounds(), got: transcript.rounds() });
    }
    if transcript.n() != samples.len() {
        return Err(Error::LengthMismatch { expected: transcript.n(), got: samples.len() });
    }
    let mut state = SessionState::new(party, samples.to_vec())?;
    for (index, (_, ch)) in transcript.indices().iter().zip(schedule.channels()) {
        state.apply_codeword(index, ch.alpha(), codebook)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::BernoulliFamily;
    use crate::randomness::{SearchPolicy, SharedRandomness};
    use rand_chacha::ChaCha8Rng;
    use rand_core::SeedableRng;

    fn session(n: usize, seed: u64, schedule: &Schedule, policy: SearchPolicy) -> Session {
        let f = BernoulliFamily::new(20.0, 20.0, 0.5).unwrap();
        let (xs, ys) = f.sample(n, &mut ChaCha8Rng::seed_from_u64(seed));
        let cb = Codebook::new(SharedRandomness::new(seed ^ 0xabc), policy);
        run_session(&xs, &ys, schedule, cb).unwrap()
    }

    #[test]
    fn parties_agree_small() {
        let s = session(8, 1, &Schedule::new(alloc::vec![2.0, 2.0]).unwrap(), SearchPolicy::default());
        for i in 0..=2 {
            assert_eq!(s.alice.u_vector(i), s.bob.u_vector(i));
        }
        let bits: usize = s.transcript.round_bit_lengths().iter().sum::<u64>() as usize;
        assert_eq!(bits, s.transcript.bit_count());
    }

    #[test]
    fn parties_agree_lazy() {
        let sched = Schedule::tetration(100.0).unwrap();
        let s = session(5000, 2, &sched, SearchPolicy::Lazy);
        for i in 0..=sched.rounds() {
            assert_eq!(s.alice.u_vector(i), s.bob.u_vector(i));
        }
    }

    #[test]
    fn sender_zeros_stay_zero_and_absorption_is_monotone() {
        let sched = Schedule::tetration(100.0).unwrap();
        let s = session(3000, 3, &sched, SearchPolicy::default());
        for l in 0..3000 {
            for i in 1..=sched.rounds() {
                assert!(s.alice.u(i - 1, l) <= s.alice.u(i, l));
                let refiner = if i % 2 == 1 { &s.alice } else { &s.bob };
                if !s.alice.u(i - 1, l) && refiner.samples()[l] == 0 {
                    assert!(!s.alice.u(i, l));
                }
            }
        }
    }

    #[test]
    fn transcript_bytes_round_trip() {
        let sched = Schedule::tetration(100.0).unwrap();
        let s = session(2000, 4, &sched, SearchPolicy::default());
        let bytes = s.transcript.to_bytes();
        assert_eq!(&bytes[0..2], &(sched.rounds() as u16).to_le_bytes());
        assert_eq!(&bytes[2..6], &2000u32.to_le_bytes());
        let back = Transcript::from_bytes(&bytes).unwrap();
        assert_eq!(back, s.transcript);
        let bob = replay(Party::Bob, s.bob.samples(), &back, &sched, &s.codebook).unwrap();
        assert_eq!(bob, s.bob);
    }

    #[test]
    fn malformed_transcripts() {
        assert!(Transcript::from_bytes(&[1, 0, 1]).is_err());
        // r = 1 but no payload.
        assert!(Transcript::from_bytes(&[1, 0, 1, 0, 0, 0]).is_err());
        // "1" then a stray one bit in the padding.
        assert!(Transcript::from_bytes(&[1, 0, 1, 0, 0, 0, 0b1100_0000]).is_err());
        // extra byte.
        assert!(Transcript::from_bytes(&[1, 0, 1, 0, 0, 0, 0b1000_0000, 0]).is_err());
        let t = Transcript::from_bytes(&[1, 0, 1, 0, 0, 0, 0b1000_0000]).unwrap();
        assert_eq!(t.indices(), &[BigUint::from(1u8)]);
        assert_eq!(t.bit_count(), 1);
    }

    #[test]
    fn fully_absorbed_round_gives_all_ones() {
        let cb = Codebook::new(SharedRandomness::new(0), SearchPolicy::default());
        let mut st = SessionState::new(Party::Bob, alloc::vec![1, 1]).unwrap();
        // With alpha = 1e9 a row entry is 0 with probability 1e-9.
        st.apply_codeword(&BigUint::from(1u8), 1e9, &cb).unwrap();
        assert!(st.active_set().is_empty());
        st.apply_codeword(&BigUint::from(7u8), 3.0, &cb).unwrap();
        assert_eq!(st.u_vector(2), alloc::vec![1, 1]);
    }

    #[test]
    fn rejects_mismatched_lengths() {
        let cb = Codebook::new(SharedRandomness::new(0), SearchPolicy::default());
        let sched = Schedule::one_way(20.0).unwrap();
        assert!(run_session(&[0, 1], &[1], &sched, cb.clone()).is_err());
        assert!(run_session(&[], &[], &sched, cb).is_err());
    }
}

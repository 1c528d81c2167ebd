//! Bit strings and the Elias gamma code.
//!
//! A positive integer `j` with `b` significant bits is written as `b - 1`
//! zeros followed by the binary expansion of `j`, most significant bit first,
//! for a total of `2 floor(log2 j) + 1` bits. Codeword indices can run to
//! tens of thousands of bits, so the codec works on [`BigUint`].

use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::Zero;

use crate::error::{Error, Result};

/// An append-only bit string, packed most significant bit first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BitString {
    bytes: Vec<u8>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, bit: bool) {
        if self.len % 8 == 0 {
            self.bytes.push(0);
        }
        if bit {
            self.bytes[self.len / 8] |= 0x80 >> (self.len % 8);
        }
        self.len += 1;
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        (i < self.len).then(|| self.bytes[i / 8] & (0x80 >> (i % 8)) != 0)
    }

    pub fn extend(&mut self, other: &BitString) {
        for i in 0..other.len {
            self.push(other.get(i).unwrap_or(false));
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.bytes[i / 8] & (0x80 >> (i % 8)) != 0)
    }

    /// The packed bytes; bits past `len` in the last byte are zero.
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Takes the first `len` bits of `bytes`.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Self> {
        if len > bytes.len() * 8 {
            return Err(Error::MalformedTranscript("bit length exceeds payload"));
        }
        let mut bytes = bytes[..len.div_ceil(8)].to_vec();
        if len % 8 != 0 {
            if let Some(last) = bytes.last_mut() {
                *last &= 0xffu8 << (8 - len % 8);
            }
        }
        Ok(BitString { bytes, len })
    }

    pub fn cursor(&self) -> BitCursor<'_> {
        BitCursor { bits: self, pos: 0 }
    }

    /// A cursor starting at bit `pos` (clamped to the end).
    pub fn cursor_at(&self, pos: usize) -> BitCursor<'_> {
        BitCursor { bits: self, pos: pos.min(self.len) }
    }
}

impl core::fmt::Display for BitString {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Sequential reader over a [`BitString`].
#[derive(Clone, Debug)]
pub struct BitCursor<'a> {
    bits: &'a BitString,
    pos: usize,
}

impl BitCursor<'_> {
    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }

    pub fn read_bit(&mut self) -> Option<bool> {
        let b = self.bits.get(self.pos)?;
        self.pos += 1;
        Some(b)
    }
}

/// Codeword length `2 floor(log2 j) + 1`.
pub fn gamma_len(j: &BigUint) -> u64 {
    debug_assert!(!j.is_zero());
    2 * (j.bits() - 1) + 1
}

/// Appends the Elias gamma codeword of `j` to `out`.
pub fn gamma_encode_into(j: &BigUint, out: &mut BitString) -> Result<()> {
    if j.is_zero() {
        return Err(Error::Domain { name: "j", value: 0.0 });
    }
    let nbits = j.bits();
    for _ in 1..nbits {
        out.push(false);
    }
    for i in (0..nbits).rev() {
        out.push(j.bit(i));
    }
    Ok(())
}

/// The Elias gamma codeword of `j >= 1`.
pub fn gamma_encode(j: &BigUint) -> Result<BitString> {
    let mut out = BitString::new();
    gamma_encode_into(j, &mut out)?;
    Ok(out)
}

pub fn gamma_encode_u64(j: u64) -> Result<BitString> {
    gamma_encode(&BigUint::from(j))
}

/// Reads one codeword; the cursor is left just past it.
pub fn gamma_decode(cursor: &mut BitCursor<'_>) -> Result<BigUint> {
    let mut zeros = 0u64;
    loop {
        match cursor.read_bit() {
            Some(false) => zeros += 1,
            Some(true) => break,
            None => return Err(Error::MalformedTranscript("truncated gamma prefix")),
        }
    }
    if (cursor.remaining() as u64) < zeros {
        return Err(Error::MalformedTranscript("truncated gamma payload"));
    }
    // Pack the leading 1 and the payload right-aligned, big-endian.
    let nbits = zeros as usize + 1;
    let mut bytes = alloc::vec![0u8; nbits.div_ceil(8)];
    let offset = bytes.len() * 8 - nbits;
    bytes[offset / 8] |= 0x80 >> (offset % 8);
    for k in 1..nbits {
        if cursor.read_bit() == Some(true) {
            let p = offset + k;
            bytes[p / 8] |= 0x80 >> (p % 8);
        }
    }
    Ok(BigUint::from_bytes_be(&bytes))
}

/// Decodes a codeword from the start of `bits`, returning it with the
/// number of bits consumed.
pub fn gamma_decode_prefix(bits: &BitString) -> Result<(BigUint, usize)> {
    let mut c = bits.cursor();
    let j = gamma_decode(&mut c)?;
    Ok((j, c.position()))
}

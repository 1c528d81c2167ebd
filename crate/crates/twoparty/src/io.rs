//! Sample and transcript files.
//!
//! A sample file is a flat sequence of little-endian `f64`. Each row holds
//! `2d` coordinates: Alice's point `x` followed by Bob's point `y`.
//! A transcript file holds the byte encoding of
//! [`Transcript`](twoparty_core::protocol::Transcript).

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use twoparty_core::protocol::Transcript;

/// Reads a sample file into row-major `(xs, ys)`.
pub fn read_samples(path: &Path, d: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode_samples(&bytes, d)
}

pub fn decode_samples(bytes: &[u8], d: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let row = 16 * d;
    if d == 0 || bytes.len() % row != 0 {
        bail!("sample payload of {} bytes is not a whole number of {row}-byte rows", bytes.len());
    }
    let n = bytes.len() / row;
    let mut xs = Vec::with_capacity(n * d);
    let mut ys = Vec::with_capacity(n * d);
    for r in bytes.chunks_exact(row) {
        for (i, c) in r.chunks_exact(8).enumerate() {
            let v = f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
            if i < d {
                xs.push(v);
            } else {
                ys.push(v);
            }
        }
    }
    Ok((xs, ys))
}

pub fn encode_samples(xs: &[f64], ys: &[f64], d: usize) -> Result<Vec<u8>> {
    if d == 0 || xs.len() != ys.len() || xs.len() % d != 0 {
        bail!("sample arrays do not form rows of dimension {d}");
    }
    let mut out = Vec::with_capacity(16 * xs.len());
    for (x, y) in xs.chunks_exact(d).zip(ys.chunks_exact(d)) {
        for v in x.iter().chain(y) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_samples(path: &Path, xs: &[f64], ys: &[f64], d: usize) -> Result<()> {
    fs::write(path, encode_samples(xs, ys, d)?).with_context(|| format!("writing {}", path.display()))
}

pub fn write_transcript(path: &Path, t: &Transcript) -> Result<()> {
    fs::write(path, t.to_bytes()).with_context(|| format!("writing {}", path.display()))
}

pub fn read_transcript(path: &Path) -> Result<Transcript> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Transcript::from_bytes(&bytes)?)
}

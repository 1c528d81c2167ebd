//! Core of a two-party estimator for the correlation of a biased Bernoulli
//! pair, and of the pointwise density estimator built on top of it.
//!
//! Alice observes `X(1..n)`, Bob observes `Y(1..n)`. Over `r` alternating
//! rounds they refine a shared picture of where the "common zeros" of the two
//! streams sit, sending one prefix-coded codeword index per round. Bob then
//! folds per-sample score functions into an unbiased estimate of `delta`.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the CLI and the
//! Monte Carlo harness live in the `twoparty` crate.
//!
//! Module map:
//!
//! * [`family`]: the delta-affine 2x2 joint law and its zero-branch marginals.
//! * [`schedule`]: refinement-factor schedules and their communication and
//!   information bounds.
//! * [`elias`]: bit strings and Elias-gamma coding.
//! * [`randomness`]: the keyed shared randomness and codeword selection.
//! * [`protocol`]: per-party session state, transcripts and the round loop.
//! * [`estimator`]: score tables and the unbiased estimators.
//! * [`kernel`]: higher-order kernels built from nested indicators.
//! * [`density`]: the pointwise density pipeline and the benchmark density.
//! * [`dpi`]: data-processing constant bounds, maximal correlation and
//!   I-projections.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod density;
pub mod dpi;
pub mod elias;
mod error;
pub mod estimator;
pub mod family;
pub mod kernel;
pub(crate) mod math;
pub mod protocol;
pub mod randomness;
pub mod schedule;

pub use error::{Error, Result};
pub use family::{AffineJoint2x2, BernoulliFamily, Party, RoundChannel, ZeroBranchState};
pub use schedule::{BoundReport, Schedule};

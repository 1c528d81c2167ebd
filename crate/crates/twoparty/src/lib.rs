//! File formats, configuration, the Monte Carlo harness and the acceptance
//! suite around [`twoparty_core`].

pub mod acceptance;
pub mod config;
pub mod harness;
pub mod io;

pub use twoparty_core as core;

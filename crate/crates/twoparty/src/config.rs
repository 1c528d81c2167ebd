//! Flat TOML configuration mirroring the command-line flags. Keys use the
//! flag names with `_` or `-`; flags given on the command line win.
//!
//! ```toml
//! k_grid = [4096, 8192, 16384]
//! d = 1
//! beta = 1.0
//! trials = 50
//! seed = 7
//! out = "sweep.csv"
//! ```

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub k: Option<f64>,
    #[serde(alias = "k-grid")]
    pub k_grid: Option<Vec<f64>>,
    pub d: Option<usize>,
    pub beta: Option<f64>,
    pub mode: Option<String>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub m1: Option<f64>,
    pub m2: Option<f64>,
    pub delta: Option<f64>,
    pub n: Option<usize>,
    pub out: Option<PathBuf>,
    pub samples: Option<PathBuf>,
    pub clamp: Option<bool>,
    pub timing: Option<bool>,
    #[serde(alias = "delta-max")]
    pub delta_max: Option<f64>,
    pub order: Option<usize>,
    pub p: Option<f64>,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Fields set in `self` win over `base`.
    pub fn over(self, base: Settings) -> Settings {
        Settings {
            k: self.k.or(base.k),
            k_grid: self.k_grid.or(base.k_grid),
            d: self.d.or(base.d),
            beta: self.beta.or(base.beta),
            mode: self.mode.or(base.mode),
            trials: self.trials.or(base.trials),
            seed: self.seed.or(base.seed),
            m1: self.m1.or(base.m1),
            m2: self.m2.or(base.m2),
            delta: self.delta.or(base.delta),
            n: self.n.or(base.n),
            out: self.out.or(base.out),
            samples: self.samples.or(base.samples),
            clamp: self.clamp.or(base.clamp),
            timing: self.timing.or(base.timing),
            delta_max: self.delta_max.or(base.delta_max),
            order: self.order.or(base.order),
            p: self.p.or(base.p),
        }
    }
}

/// Parses `65536`, `6.5e4` or `2^16`.
pub fn parse_budget(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('^') {
        Some((b, e)) => {
            let b: f64 = b.trim().parse().map_err(|_| format!("bad base in `{s}`"))?;
            let e: f64 = e.trim().parse().map_err(|_| format!("bad exponent in `{s}`"))?;
            b.powf(e)
        }
        None => s.parse().map_err(|_| format!("bad number `{s}`"))?,
    };
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("`{s}` must be positive"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = Settings::parse("k-grid = [4096, 8192]\nd = 2\nseed = 5\nmode = \"oneway\"\n").unwrap();
        assert_eq!(file.k_grid, Some(vec![4096.0, 8192.0]));
        let flags = Settings { seed: Some(9), ..Default::default() };
        let s = flags.over(file);
        assert_eq!(s.seed, Some(9));
        assert_eq!(s.d, Some(2));
        assert_eq!(s.mode.as_deref(), Some("oneway"));
        assert!(Settings::parse("bogus = 1").is_err());
    }

    #[test]
    fn budgets() {
        assert_eq!(parse_budget("2^16"), Ok(65536.0));
        assert_eq!(parse_budget("4096"), Ok(4096.0));
        assert_eq!(parse_budget("1e3"), Ok(1000.0));
        assert!(parse_budget("-3").is_err());
        assert!(parse_budget("x").is_err());
    }
}

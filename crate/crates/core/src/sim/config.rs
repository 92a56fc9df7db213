use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sched::{RetxSizer, DEFAULT_RETX_FRACTION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    NoHarq,
    Baseline,
    Advanced,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::NoHarq, Scheme::Baseline, Scheme::Advanced];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::NoHarq => "no_harq",
            Scheme::Baseline => "baseline",
            Scheme::Advanced => "advanced",
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "no_harq" | "noharq" | "amc" => Ok(Scheme::NoHarq),
            "baseline" => Ok(Scheme::Baseline),
            "advanced" | "lharq" | "l_harq" => Ok(Scheme::Advanced),
            other => Err(Error::invalid("scheme", format!("unknown scheme `{other}`"))),
        }
    }
}

/// Parses `all` or a comma-separated scheme list.
pub fn parse_schemes(s: &str) -> Result<Vec<Scheme>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Scheme::ALL.to_vec());
    }
    let mut out: Vec<Scheme> = s.split(',').map(str::parse).collect::<Result<_>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

/// `min, min + step, ..` up to and including `max` (within rounding).
pub fn snr_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite() && step.is_finite()) || step <= 0.0 || max < min {
        return Err(Error::invalid("snr grid", format!("bad range {min}..{max} step {step}")));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| min + step * i as f64).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub num_tx_antennas: usize,
    pub num_users: usize,
    pub block_length: usize,
    pub csit_exponent: f64,
    pub common_power_fraction: f64,
    pub snr_grid_db: Vec<f64>,
    /// Drops per SNR point.
    pub num_realizations: usize,
    pub schemes: Vec<Scheme>,
    pub max_retx_common: usize,
    pub max_retx_private: usize,
    pub retx_fraction: f64,
    /// Selects the target-PER sizer when set.
    pub target_eps: Option<f64>,
    pub master_seed: u64,
    /// Ceiling on the CSIT error power as a fraction of the channel power.
    pub error_power_cap: f64,
    pub mcs_table: Option<PathBuf>,
    pub mcs_backoff_db: f64,
    /// Error-channel draws per conditional SINR CDF (target-PER sizer only).
    pub cdf_samples: usize,
    /// Overrides the default drop length.
    pub blocks_per_drop: Option<usize>,
    /// Rayon worker count; 0 uses the global pool.
    pub workers: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            num_tx_antennas: 8,
            num_users: 4,
            block_length: 256,
            csit_exponent: 0.6,
            common_power_fraction: 0.9,
            snr_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            num_realizations: 10_000,
            schemes: Scheme::ALL.to_vec(),
            max_retx_common: 1,
            max_retx_private: 1,
            retx_fraction: DEFAULT_RETX_FRACTION,
            target_eps: None,
            master_seed: 1,
            error_power_cap: 0.99,
            mcs_table: None,
            mcs_backoff_db: 0.0,
            cdf_samples: 200,
            blocks_per_drop: None,
            workers: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_tx_antennas", self.num_tx_antennas),
            ("num_users", self.num_users),
            ("block_length", self.block_length),
            ("num_realizations", self.num_realizations),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("snr_grid_db", "must be a nonempty list of finite values"));
        }
        if self.schemes.is_empty() {
            return Err(Error::invalid("schemes", "need at least one scheme"));
        }
        if !(self.csit_exponent.is_finite() && self.csit_exponent >= 0.0) {
            return Err(Error::invalid("csit_exponent", "must be finite and nonnegative"));
        }
        let unit = [
            ("common_power_fraction", self.common_power_fraction),
            ("retx_fraction", self.retx_fraction),
        ];
        for (name, v) in unit {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(name, format!("{v} not in (0, 1]")));
            }
        }
        if self.common_power_fraction >= 1.0 {
            return Err(Error::invalid(
                "common_power_fraction",
                "private streams need a positive share",
            ));
        }
        if !(self.error_power_cap > 0.0 && self.error_power_cap < 1.0) {
            return Err(Error::invalid("error_power_cap", "must lie in (0, 1)"));
        }
        for (name, v) in [
            ("max_retx_common", self.max_retx_common),
            ("max_retx_private", self.max_retx_private),
        ] {
            if !(1..=2).contains(&v) {
                return Err(Error::invalid(name, format!("{v} not in {{1, 2}}")));
            }
        }
        if let Some(eps) = self.target_eps {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::invalid("target_eps", format!("{eps} not in (0, 1)")));
            }
            if self.cdf_samples < 2 {
                return Err(Error::invalid("cdf_samples", "need at least 2 samples"));
            }
        }
        if !(self.mcs_backoff_db.is_finite() && self.mcs_backoff_db >= 0.0) {
            return Err(Error::invalid("mcs_backoff_db", "must be finite and nonnegative"));
        }
        if self.blocks_per_drop == Some(0) {
            return Err(Error::invalid("blocks_per_drop", "must be positive"));
        }
        Ok(())
    }

    pub fn max_rounds(&self) -> usize {
        1 + self.max_retx_common.max(self.max_retx_private)
    }

    /// `max(8, 4 · max_rounds)` unless overridden.
    pub fn blocks_per_drop(&self) -> usize {
        self.blocks_per_drop
            .unwrap_or_else(|| (4 * self.max_rounds()).max(8))
    }

    pub fn retx_sizer(&self) -> RetxSizer {
        match self.target_eps {
            Some(eps) => RetxSizer::TargetPer {
                eps,
                fallback_fraction: self.retx_fraction,
            },
            None => RetxSizer::FixedFraction(self.retx_fraction),
        }
    }

    pub(crate) fn scheme_stream(scheme: Scheme) -> u64 {
        scheme.index()
    }

    /// Applies `key = value` lines. Keys are the field names; lists are
    /// comma-separated and `none` clears an optional field.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| Error::ConfigParse {
                line: i + 1,
                reason,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            self.set(key.trim(), value.trim()).map_err(|e| err(e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_kv_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = SimConfig::default();
        cfg.apply_kv(&text)?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T>
        where
            T::Err: fmt::Display,
        {
            v.parse()
                .map_err(|e| Error::invalid("config value", format!("{key} = `{v}`: {e}")))
        }
        let none = value.eq_ignore_ascii_case("none") || value.is_empty();
        match key {
            "num_tx_antennas" => self.num_tx_antennas = num(key, value)?,
            "num_users" => self.num_users = num(key, value)?,
            "block_length" => self.block_length = num(key, value)?,
            "csit_exponent" => self.csit_exponent = num(key, value)?,
            "common_power_fraction" => self.common_power_fraction = num(key, value)?,
            "snr_grid_db" => {
                self.snr_grid_db = value
                    .split(',')
                    .map(|s| num(key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "num_realizations" | "drops" => self.num_realizations = num(key, value)?,
            "scheme" | "schemes" => self.schemes = parse_schemes(value)?,
            "max_retx" => {
                self.max_retx_common = num(key, value)?;
                self.max_retx_private = self.max_retx_common;
            }
            "max_retx_common" => self.max_retx_common = num(key, value)?,
            "max_retx_private" => self.max_retx_private = num(key, value)?,
            "retx_fraction" => self.retx_fraction = num(key, value)?,
            "target_eps" => self.target_eps = if none { None } else { Some(num(key, value)?) },
            "master_seed" | "seed" => self.master_seed = num(key, value)?,
            "error_power_cap" => self.error_power_cap = num(key, value)?,
            "mcs_table" => self.mcs_table = (!none).then(|| PathBuf::from(value)),
            "mcs_backoff_db" => self.mcs_backoff_db = num(key, value)?,
            "cdf_samples" => self.cdf_samples = num(key, value)?,
            "blocks_per_drop" => {
                self.blocks_per_drop = if none { None } else { Some(num(key, value)?) }
            }
            "workers" => self.workers = num(key, value)?,
            other => return Err(Error::invalid("config key", format!("unknown key `{other}`"))),
        }
        Ok(())
    }
}

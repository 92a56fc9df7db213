//! Rate selection from the CSIT estimate, quantized to an MCS table.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::phy::{compute_sinrs, RateAllocation, SinrReport, SplitRule};
use crate::precoder::{gains_for_channel, PrecoderSet};
use crate::scalar::Real;

pub const MODULATION_ORDERS: [u32; 4] = [4, 16, 64, 256];
pub const CODE_RATES: [(u32, u32); 5] = [(1, 3), (1, 2), (2, 3), (3, 4), (5, 6)];

/// Efficiencies closer than this are treated as the same entry.
const EFFICIENCY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McsEntry {
    pub modulation_order: u32,
    pub code_rate: f64,
    /// `log₂(order) · code_rate`, bits/symbol.
    pub spectral_efficiency: f64,
}

impl McsEntry {
    pub fn new(modulation_order: u32, code_rate: f64) -> Result<Self> {
        if !MODULATION_ORDERS.contains(&modulation_order) {
            return Err(Error::invalid(
                "modulation_order",
                format!("{modulation_order} is not one of 4, 16, 64, 256"),
            ));
        }
        if !(code_rate > 0.0 && code_rate <= 1.0) {
            return Err(Error::invalid("code_rate", format!("{code_rate} not in (0, 1]")));
        }
        Ok(McsEntry {
            modulation_order,
            code_rate,
            spectral_efficiency: f64::from(modulation_order).log2() * code_rate,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct McsTable {
    entries: Vec<McsEntry>,
    pub backoff_db: f64,
}

impl McsTable {
    /// Sorts by efficiency and drops duplicates, keeping the lower
    /// modulation order.
    pub fn new(mut entries: Vec<McsEntry>, backoff_db: f64) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyMcsTable);
        }
        if !(backoff_db.is_finite() && backoff_db >= 0.0) {
            return Err(Error::invalid("backoff_db", "must be finite and nonnegative"));
        }
        entries.sort_by(|a, b| {
            a.spectral_efficiency
                .total_cmp(&b.spectral_efficiency)
                .then(a.modulation_order.cmp(&b.modulation_order))
        });
        entries.dedup_by(|later, kept| {
            (later.spectral_efficiency - kept.spectral_efficiency).abs() < EFFICIENCY_TOL
        });
        Ok(McsTable {
            entries,
            backoff_db,
        })
    }

    /// QAM orders 4..256 with code rates 1/3, 1/2, 2/3, 3/4, 5/6.
    pub fn standard() -> Self {
        let entries = MODULATION_ORDERS
            .iter()
            .flat_map(|&m| {
                CODE_RATES
                    .iter()
                    .map(move |&(a, b)| McsEntry::new(m, f64::from(a) / f64::from(b)).expect("valid"))
            })
            .collect();
        McsTable::new(entries, 0.0).expect("nonempty")
    }

    pub fn with_backoff_db(mut self, backoff_db: f64) -> Result<Self> {
        if !(backoff_db.is_finite() && backoff_db >= 0.0) {
            return Err(Error::invalid("backoff_db", "must be finite and nonnegative"));
        }
        self.backoff_db = backoff_db;
        Ok(self)
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }

    /// Parses lines of `order code_rate`; the rate may be written `a/b`.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str, backoff_db: f64) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| Error::McsParse {
                line: i + 1,
                reason,
            };
            let mut parts = line.split_whitespace();
            let (Some(order), Some(rate), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(err("expected `order code_rate`".into()));
            };
            let order: u32 = order
                .parse()
                .map_err(|e| err(format!("bad modulation order `{order}`: {e}")))?;
            let rate = parse_rate(rate).ok_or_else(|| err(format!("bad code rate `{rate}`")))?;
            entries.push(McsEntry::new(order, rate).map_err(|e| err(e.to_string()))?);
        }
        McsTable::new(entries, backoff_db)
    }

    pub fn load(path: &Path, backoff_db: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        McsTable::parse(&text, backoff_db)
    }

    /// Highest entry not exceeding `capacity`; the lowest entry when none
    /// fits.
    pub fn quantize(&self, capacity: f64) -> &McsEntry {
        let n = self
            .entries
            .partition_point(|e| e.spectral_efficiency <= capacity);
        &self.entries[n.saturating_sub(1)]
    }

    /// `10^(−backoff/10)`.
    pub fn backoff_factor(&self) -> f64 {
        10f64.powf(-self.backoff_db / 10.0)
    }
}

fn parse_rate(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
            (b != 0.0).then(|| a / b)
        }
        None => s.parse().ok(),
    }
}

/// SINRs the transmitter predicts from `Ĥ`.
pub fn estimated_sinrs<T: Real>(
    estimated_channel: &CMatrix<T>,
    precoders: &PrecoderSet<T>,
    noise_powers: &[T],
) -> Result<SinrReport<T>> {
    compute_sinrs(&gains_for_channel(estimated_channel, precoders)?, noise_powers)
}

/// Quantized stream rates for one block from the CSIT estimate.
pub fn select_rates<T: Real>(
    estimated_channel: &CMatrix<T>,
    precoders: &PrecoderSet<T>,
    noise_powers: &[T],
    table: &McsTable,
    split_rule: SplitRule<'_, T>,
) -> Result<RateAllocation<T>> {
    let sinrs = estimated_sinrs(estimated_channel, precoders, noise_powers)?;
    Ok(rates_from_sinrs(&sinrs, table, split_rule))
}

/// Quantization step of [`select_rates`] on already computed SINRs.
pub fn rates_from_sinrs<T: Real>(
    sinrs: &SinrReport<T>,
    table: &McsTable,
    split_rule: SplitRule<'_, T>,
) -> RateAllocation<T> {
    let factor = table.backoff_factor();
    let capacity = |g: T| (1.0 + g.to_f64_lossy().max(0.0) * factor).log2();
    let worst = sinrs
        .common
        .iter()
        .map(|&g| capacity(g))
        .fold(f64::INFINITY, f64::min);
    let common_rate = T::lit(table.quantize(worst).spectral_efficiency);
    RateAllocation {
        common_rate,
        common_portions: split_rule.split(common_rate, sinrs.num_users()),
        private_rates: sinrs
            .private
            .iter()
            .map(|&g| T::lit(table.quantize(capacity(g)).spectral_efficiency))
            .collect(),
    }
}

//! Per-user SINRs and rates of the 1-layer rate-splitting signal.

use crate::error::{Error, Result};
use crate::precoder::GainTable;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct SinrReport<T> {
    /// `γ_{c,k}`: common stream, all private streams treated as noise.
    pub common: Vec<T>,
    /// `γ_{p,k}`: private stream after the common stream is cancelled.
    pub private: Vec<T>,
}

impl<T: Real> SinrReport<T> {
    pub fn num_users(&self) -> usize {
        self.common.len()
    }

    pub fn cast<U: Real>(&self) -> SinrReport<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::lit(x.to_f64_lossy())).collect();
        SinrReport {
            common: conv(&self.common),
            private: conv(&self.private),
        }
    }
}

/// SINRs of every user from its gain table row and noise power.
pub fn compute_sinrs<T: Real>(gains: &GainTable<T>, noise_powers: &[T]) -> Result<SinrReport<T>> {
    let k = gains.num_users();
    if noise_powers.len() != k || gains.cross.len() != k || gains.cross.iter().any(|r| r.len() != k)
    {
        return Err(Error::DimensionMismatch(format!(
            "gain table for {k} users with {} noise powers",
            noise_powers.len()
        )));
    }
    if noise_powers.iter().any(|&n| !(n.is_finite() && n > T::zero())) {
        return Err(Error::invalid("noise_powers", "must be finite and positive"));
    }
    let finite = gains.common.iter().all(|g| g.is_finite())
        && gains.cross.iter().flatten().all(|g| g.is_finite());
    if !finite {
        return Err(Error::NonFinite("gain table"));
    }

    let mut common = Vec::with_capacity(k);
    let mut private = Vec::with_capacity(k);
    for user in 0..k {
        let row = &gains.cross[user];
        let all_private: T = row.iter().copied().sum();
        let own = row[user];
        let noise = noise_powers[user];
        common.push(gains.common[user] / (all_private + noise));
        private.push(own / ((all_private - own).max(T::zero()) + noise));
    }
    Ok(SinrReport { common, private })
}

/// How the common rate `R_c` is divided into per-user portions `C_k`.
#[derive(Clone, Copy, Debug)]
pub enum SplitRule<'a, T> {
    Equal,
    /// Proportional to each user's pending common-stream demand; falls back
    /// to an equal split when the total demand is zero.
    ProportionalToDemand(&'a [T]),
}

impl<T: Real> SplitRule<'_, T> {
    /// Portions of `total` over `num_users`; always sums to `total`.
    pub fn split(&self, total: T, num_users: usize) -> Vec<T> {
        let equal = || vec![total / T::from_usize_lossy(num_users); num_users];
        match self {
            SplitRule::Equal => equal(),
            SplitRule::ProportionalToDemand(demand) => {
                let sum: T = demand.iter().map(|d| d.max(T::zero())).sum();
                if demand.len() != num_users || !(sum > T::zero()) || !sum.is_finite() {
                    return equal();
                }
                demand.iter().map(|d| total * d.max(T::zero()) / sum).collect()
            }
        }
    }
}

/// Stream rates in bits/symbol with the common rate divided among users.
#[derive(Clone, Debug, PartialEq)]
pub struct RateAllocation<T> {
    /// `R_c`.
    pub common_rate: T,
    /// `C_k`, summing to `R_c`.
    pub common_portions: Vec<T>,
    /// `R_{p,k}`.
    pub private_rates: Vec<T>,
}

impl<T: Real> RateAllocation<T> {
    pub fn num_users(&self) -> usize {
        self.private_rates.len()
    }

    /// `⌊R_c · N_s⌋`.
    pub fn common_bits(&self, block_length: usize) -> u32 {
        rate_to_bits(self.common_rate, block_length)
    }

    /// `⌊R_{p,k} · N_s⌋`.
    pub fn private_bits(&self, user: usize, block_length: usize) -> u32 {
        rate_to_bits(self.private_rates[user], block_length)
    }

    /// `|Σ_k C_k − R_c|`.
    pub fn portion_residual(&self) -> T {
        (self.common_portions.iter().copied().sum::<T>() - self.common_rate).abs()
    }
}

/// Integral number of bits a stream at `rate` carries in one block.
pub fn rate_to_bits<T: Real>(rate: T, block_length: usize) -> u32 {
    let bits = (rate * T::from_usize_lossy(block_length)).floor();
    bits.to_u32().unwrap_or(0)
}

/// Capacity-achieving rates from a SINR report: `R_c = min_k log₂(1+γ_{c,k})`
/// and `R_{p,k} = log₂(1+γ_{p,k})`.
pub fn ideal_rate_allocation<T: Real>(sinrs: &SinrReport<T>, split_rule: SplitRule<'_, T>) -> RateAllocation<T> {
    let k = sinrs.num_users();
    let common_rate = sinrs
        .common
        .iter()
        .map(|&g| (T::one() + g.max(T::zero())).log2())
        .fold(T::infinity(), |m, r| m.min(r));
    let common_rate = if k == 0 { T::zero() } else { common_rate };
    RateAllocation {
        common_rate,
        common_portions: split_rule.split(common_rate, k),
        private_rates: sinrs
            .private
            .iter()
            .map(|&g| (T::one() + g.max(T::zero())).log2())
            .collect(),
    }
}

/// Splits `total` integral bits proportionally to `weights` by the largest
/// remainder method; ties go to the lower index. The result sums to `total`.
/// Zero or degenerate weights give an equal split.
pub fn apportion_bits(total: u32, weights: &[f64]) -> Vec<u32> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let sum: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    let shares: Vec<f64> = if sum > 0.0 && sum.is_finite() {
        weights
            .iter()
            .map(|w| total as f64 * w.max(0.0) / sum)
            .collect()
    } else {
        vec![total as f64 / n as f64; n]
    };
    let mut out: Vec<u32> = shares.iter().map(|s| s.floor() as u32).collect();
    let assigned: u32 = out.iter().sum();
    let mut rest = total.saturating_sub(assigned);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let ra = shares[a] - shares[a].floor();
        let rb = shares[b] - shares[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        out[i] += 1;
        rest -= 1;
    }
    out
}

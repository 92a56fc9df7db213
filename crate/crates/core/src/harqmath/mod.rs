//! HARQ numerics: accumulated mutual information, finite-blocklength packet
//! error rates for HARQ-IR and for backtrack decoding, the piecewise-linear
//! surrogate used to average the backtrack PER over a conditional SINR
//! distribution, and the minimum retransmission length solver.

mod backtrack;
mod sampling;

pub use backtrack::{
    average_backtrack_per, min_retransmission_length, surrogate_params, CdfFn, ConditionalCdf,
    EmpiricalCdf, RetxLength, SurrogateParams,
};
pub use sampling::{average_per_monte_carlo, sample_decode_outcome, DecodeMode, McEstimate};

use crate::error::{Error, Result};
use crate::scalar::{clamp_probability, q_function, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HarqCategory {
    TypeI,
    ChaseCombining,
    IncrementalRedundancy,
}

/// `I(γ) = log₂(1 + γ)`.
#[inline]
pub fn mutual_information<T: Real>(sinr: T) -> T {
    sinr.max(T::zero()).ln_1p() * T::LOG2_E()
}

/// Accumulated mutual information after `sinr_history.len()` rounds.
pub fn accumulated_mutual_information<T: Real>(category: HarqCategory, sinr_history: &[T]) -> Result<T> {
    if sinr_history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    if sinr_history.iter().any(|g| !(g.is_finite() && *g >= T::zero())) {
        return Err(Error::invalid("sinr_history", "entries must be finite and nonnegative"));
    }
    Ok(match category {
        HarqCategory::TypeI => sinr_history
            .iter()
            .map(|&g| mutual_information(g))
            .fold(T::zero(), T::max),
        HarqCategory::ChaseCombining => mutual_information(sinr_history.iter().copied().sum()),
        HarqCategory::IncrementalRedundancy => {
            sinr_history.iter().map(|&g| mutual_information(g)).sum()
        }
    })
}

/// Channel dispersion term `1 − (1+γ)^(−2)`, written so it stays accurate
/// for small `γ`.
#[inline]
fn dispersion<T: Real>(sinr: T) -> T {
    let one = T::one();
    sinr * (sinr + one + one) / ((one + sinr) * (one + sinr))
}

/// A HARQ-IR decode of one packet from all of its rounds so far.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodeAttempt<T> {
    pub sinr_history: Vec<T>,
    pub first_round_rate: T,
    pub block_length: usize,
}

impl<T: Real> DecodeAttempt<T> {
    pub fn per(&self) -> Result<T> {
        harq_ir_per(self)
    }
}

/// Normal-approximation PER of a HARQ-IR process after `T` rounds.
///
/// Rounds with `γ = 0` contribute nothing to either sum. If no round is left
/// the variance vanishes and the limit is returned: 1 for a positive rate,
/// 0 for rate zero.
pub fn harq_ir_per<T: Real>(attempt: &DecodeAttempt<T>) -> Result<T> {
    if attempt.sinr_history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    if attempt.block_length == 0 {
        return Err(Error::invalid("block_length", "must be positive"));
    }
    if !attempt.first_round_rate.is_finite() {
        return Err(Error::NonFinite("first_round_rate"));
    }
    if attempt
        .sinr_history
        .iter()
        .any(|g| g.is_nan() || *g < T::zero())
    {
        return Err(Error::invalid("sinr_history", "entries must be nonnegative"));
    }
    Ok(ir_per_unchecked(
        &attempt.sinr_history,
        attempt.first_round_rate,
        attempt.block_length,
    ))
}

/// Same formula without validation; used on hot paths whose inputs are
/// produced internally.
pub(crate) fn ir_per_unchecked<T: Real>(sinr_history: &[T], rate: T, block_length: usize) -> T {
    let ns = T::from_usize_lossy(block_length);
    let rounds = T::from_usize_lossy(sinr_history.len());
    let mut info = T::zero();
    let mut var = T::zero();
    for &g in sinr_history {
        if g > T::zero() {
            info += mutual_information(g);
            var += dispersion(g);
        }
    }
    if var <= T::zero() {
        return if rate > T::zero() { T::one() } else { T::zero() };
    }
    let two = T::lit(2.0);
    let num = info - rate + (rounds * ns).log2() / (two * ns);
    let den = (var / ns).sqrt() * T::LOG2_E();
    clamp_probability(q_function(num / den))
}

/// Backtrack decode of a buffered first-round signal after some
/// retransmission bits have been extracted for it.
#[derive(Clone, Debug, PartialEq)]
pub struct BacktrackAttempt<T> {
    pub first_round_sinr: T,
    pub original_rate: T,
    /// `β^{(2..T)}`.
    pub extracted_bit_credits: Vec<u32>,
    pub block_length: usize,
}

impl<T: Real> BacktrackAttempt<T> {
    pub fn credit_total(&self) -> u64 {
        self.extracted_bit_credits.iter().map(|&b| u64::from(b)).sum()
    }

    pub fn reduced_rate(&self) -> T {
        reduced_rate(self.original_rate, self.credit_total(), self.block_length)
    }

    pub fn per(&self) -> Result<T> {
        backtrack_per(self)
    }
}

/// `R̂ = max(0, R − Σβ/N_s + log₂(N_s)/(2N_s))`.
pub fn reduced_rate<T: Real>(original_rate: T, credit_total: u64, block_length: usize) -> T {
    let ns = T::from_usize_lossy(block_length);
    let credits = T::lit(credit_total as f64);
    (original_rate - credits / ns + ns.log2() / (T::lit(2.0) * ns)).max(T::zero())
}

/// Normal-approximation PER of backtrack decoding at the reduced rate.
pub fn backtrack_per<T: Real>(attempt: &BacktrackAttempt<T>) -> Result<T> {
    if attempt.block_length == 0 {
        return Err(Error::invalid("block_length", "must be positive"));
    }
    let g = attempt.first_round_sinr;
    if g.is_nan() || g < T::zero() {
        return Err(Error::invalid("first_round_sinr", "must be nonnegative"));
    }
    if !attempt.original_rate.is_finite() {
        return Err(Error::NonFinite("original_rate"));
    }
    Ok(backtrack_per_at(g, attempt.reduced_rate(), attempt.block_length))
}

/// Backtrack PER for an already reduced rate `R̂`.
pub fn backtrack_per_at<T: Real>(sinr: T, reduced: T, block_length: usize) -> T {
    if !(sinr > T::zero()) {
        return if reduced > T::zero() { T::one() } else { T::zero() };
    }
    if sinr == T::infinity() {
        return T::zero();
    }
    let ns = T::from_usize_lossy(block_length);
    let num = ns.sqrt() * (mutual_information(sinr) - reduced);
    let den = dispersion(sinr).sqrt() * T::LOG2_E();
    clamp_probability(q_function(num / den))
}

//! Common and private precoders built from the CSIT estimate.
//!
//! The common precoder points along the dominant left singular vector of
//! `Ĥ`; each private precoder is the MRT direction `ĥ_k / ‖ĥ_k‖`. A fraction
//! of the power budget goes to the common stream and the remainder is split
//! equally over the private streams.

use num_complex::Complex;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::linalg::{dominant_left_singular, inner, norm_sqr, scale, CMatrix};
use crate::scalar::Real;

/// Fraction of the transmit power put on the common stream by default.
pub const DEFAULT_COMMON_POWER_FRACTION: f64 = 0.9;

#[derive(Clone, Debug, PartialEq)]
pub struct PrecoderSet<T> {
    /// `p_c`.
    pub common: Vec<Complex<T>>,
    /// `p_1 .. p_K`.
    pub private: Vec<Vec<Complex<T>>>,
    pub total_power: T,
    pub common_power_fraction: T,
}

impl<T: Real> PrecoderSet<T> {
    pub fn num_users(&self) -> usize {
        self.private.len()
    }

    /// `Tr(P Pᴴ) = ‖p_c‖² + Σ_k ‖p_k‖²`.
    pub fn trace_power(&self) -> T {
        norm_sqr(&self.common) + self.private.iter().map(|p| norm_sqr(p)).sum::<T>()
    }

    /// Same directions, every precoder scaled so that the total power becomes
    /// `total_power` (the common fraction is kept).
    pub fn rescaled(&self, total_power: T) -> Self {
        let s = (total_power / self.total_power).sqrt();
        PrecoderSet {
            common: scale(&self.common, s),
            private: self.private.iter().map(|p| scale(p, s)).collect(),
            total_power,
            common_power_fraction: self.common_power_fraction,
        }
    }
}

/// SVD (common) + MRT (private) precoders under the total power constraint.
pub fn build_svd_mrt<T: Real>(
    estimated_channel: &CMatrix<T>,
    total_power: T,
    common_power_fraction: T,
) -> Result<PrecoderSet<T>> {
    if !estimated_channel.is_finite() {
        return Err(Error::NonFinite("estimated channel"));
    }
    if !(total_power.is_finite() && total_power > T::zero()) {
        return Err(Error::invalid("total_power", "must be finite and positive"));
    }
    if !(common_power_fraction >= T::zero() && common_power_fraction <= T::one()) {
        return Err(Error::invalid("common_power_fraction", "must lie in [0, 1]"));
    }
    let k = estimated_channel.cols();
    if k == 0 || estimated_channel.rows() == 0 {
        return Err(Error::DimensionMismatch("empty channel matrix".to_string()));
    }

    let mut private = Vec::with_capacity(k);
    let private_amp = ((T::one() - common_power_fraction) * total_power
        / T::from_usize_lossy(k))
    .sqrt();
    for (user, col) in estimated_channel.columns().enumerate() {
        let nrm = norm_sqr(col).sqrt();
        if nrm == T::zero() {
            return Err(Error::ZeroChannelColumn(user));
        }
        private.push(scale(col, private_amp / nrm));
    }

    let (_, direction) = dominant_left_singular(estimated_channel);
    let common = scale(&direction, (common_power_fraction * total_power).sqrt());

    Ok(PrecoderSet {
        common,
        private,
        total_power,
        common_power_fraction,
    })
}

/// Effective channel gains seen by every user.
#[derive(Clone, Debug, PartialEq)]
pub struct GainTable<T> {
    /// `|h_kᴴ p_c|²` per user `k`.
    pub common: Vec<T>,
    /// `cross[k][j] = |h_kᴴ p_j|²`.
    pub cross: Vec<Vec<T>>,
}

impl<T: Real> GainTable<T> {
    pub fn num_users(&self) -> usize {
        self.common.len()
    }
}

/// Gain table for an arbitrary channel matrix (true or estimated).
pub fn gains_for_channel<T: Real>(
    channel: &CMatrix<T>,
    precoders: &PrecoderSet<T>,
) -> Result<GainTable<T>> {
    let k = precoders.num_users();
    if channel.cols() != k {
        return Err(Error::DimensionMismatch(format!(
            "channel has {} users, precoder set has {}",
            channel.cols(),
            k
        )));
    }
    if channel.rows() != precoders.common.len()
        || precoders.private.iter().any(|p| p.len() != channel.rows())
    {
        return Err(Error::DimensionMismatch(
            "antenna count differs between channel and precoders".to_string(),
        ));
    }
    let mut common = Vec::with_capacity(k);
    let mut cross = Vec::with_capacity(k);
    for h in channel.columns() {
        common.push(inner(h, &precoders.common).norm_sqr());
        cross.push(
            precoders
                .private
                .iter()
                .map(|p| inner(h, p).norm_sqr())
                .collect(),
        );
    }
    Ok(GainTable { common, cross })
}

/// Gains over the TRUE channel of a realization (what the receivers see).
pub fn effective_gains<T: Real>(
    realization: &ChannelRealization<T>,
    precoders: &PrecoderSet<T>,
) -> Result<GainTable<T>> {
    gains_for_channel(&realization.true_channel, precoders)
}

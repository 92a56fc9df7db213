//! Block-fading Rayleigh channels with Gaussian CSIT error.
//!
//! Each block draws an estimate `Ĥ` and an independent error `H̃` with
//! per-user column variances `σ_k² − σ_e²` and `σ_e²`; the channel the users
//! actually see is `H = Ĥ + H̃`. The error power follows `σ_e² = P_t^(−α)`.

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::Real;

/// Statistical description of the channel and the CSIT quality.
#[derive(Clone, Debug, PartialEq)]
pub struct CsitModel<T> {
    pub num_tx_antennas: usize,
    pub num_users: usize,
    /// `σ_k²` per user.
    pub channel_power: Vec<T>,
    /// `α` in `σ_e² = P_t^(−α)`.
    pub csit_exponent: T,
    /// `σ_{n,k}²` per user.
    pub noise_power: Vec<T>,
    /// Optional ceiling on `σ_e²` as a fraction of `σ_k²`. When set, the error
    /// power becomes `min(P_t^(−α), cap · σ_k²)`.
    pub error_power_cap: Option<T>,
}

impl<T: Real> CsitModel<T> {
    pub fn new(
        num_tx_antennas: usize,
        channel_power: Vec<T>,
        csit_exponent: T,
        noise_power: Vec<T>,
    ) -> Result<Self> {
        let num_users = channel_power.len();
        if num_tx_antennas == 0 {
            return Err(Error::invalid("num_tx_antennas", "must be positive"));
        }
        if num_users == 0 {
            return Err(Error::invalid("channel_power", "need at least one user"));
        }
        if noise_power.len() != num_users {
            return Err(Error::DimensionMismatch(format!(
                "{} channel powers vs {} noise powers",
                num_users,
                noise_power.len()
            )));
        }
        if channel_power
            .iter()
            .chain(&noise_power)
            .any(|&p| !(p.is_finite() && p > T::zero()))
        {
            return Err(Error::invalid("power", "all powers must be finite and positive"));
        }
        if !(csit_exponent.is_finite() && csit_exponent >= T::zero()) {
            return Err(Error::invalid("csit_exponent", "must be finite and nonnegative"));
        }
        Ok(CsitModel {
            num_tx_antennas,
            num_users,
            channel_power,
            csit_exponent,
            noise_power,
            error_power_cap: None,
        })
    }

    /// Unit channel and noise powers for every user.
    pub fn uniform(num_tx_antennas: usize, num_users: usize, csit_exponent: T) -> Result<Self> {
        Self::new(
            num_tx_antennas,
            vec![T::one(); num_users],
            csit_exponent,
            vec![T::one(); num_users],
        )
    }

    pub fn with_error_power_cap(mut self, cap: T) -> Result<Self> {
        if !(cap > T::zero() && cap < T::one()) {
            return Err(Error::invalid("error_power_cap", "must lie in (0, 1)"));
        }
        self.error_power_cap = Some(cap);
        Ok(self)
    }

    /// `P_t^(−α)`, before any cap.
    pub fn nominal_error_power(&self, transmit_power: T) -> T {
        transmit_power.powf(-self.csit_exponent)
    }

    /// Per-user CSIT error power at the given transmit power, validated
    /// against `0 < σ_e² < σ_k²`.
    pub fn error_powers(&self, transmit_power: T) -> Result<Vec<T>> {
        if !(transmit_power.is_finite() && transmit_power > T::zero()) {
            return Err(Error::invalid("transmit_power", "must be finite and positive"));
        }
        let nominal = self.nominal_error_power(transmit_power);
        self.channel_power
            .iter()
            .enumerate()
            .map(|(k, &sigma2)| {
                let e = match self.error_power_cap {
                    Some(cap) => nominal.min(cap * sigma2),
                    None => nominal,
                };
                if e >= sigma2 {
                    Err(Error::CsitErrorTooLarge {
                        user: k,
                        error_power: e.to_f64_lossy(),
                        channel_power: sigma2.to_f64_lossy(),
                    })
                } else {
                    Ok(e)
                }
            })
            .collect()
    }
}

/// One block of true channel, CSIT estimate and estimation error.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization<T> {
    /// `H`, `N_t x K`; column `k` is `h_k`.
    pub true_channel: CMatrix<T>,
    /// `Ĥ`.
    pub estimated_channel: CMatrix<T>,
    /// `H̃`.
    pub error_channel: CMatrix<T>,
    pub block_index: usize,
}

impl<T: Real> ChannelRealization<T> {
    /// Largest entry of `|H − Ĥ − H̃|`.
    pub fn decomposition_residual(&self) -> T {
        let mut worst = T::zero();
        for ((h, e), t) in self
            .true_channel
            .as_slice()
            .iter()
            .zip(self.estimated_channel.as_slice())
            .zip(self.error_channel.as_slice())
        {
            worst = worst.max((h - e - t).norm());
        }
        worst
    }
}

/// Circularly-symmetric complex Gaussian sample with variance `variance`.
pub(crate) fn cscg<T: Real, R: Rng + ?Sized>(rng: &mut R, variance: T) -> Complex<T> {
    let sd = (variance.to_f64_lossy() / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(T::lit(re * sd), T::lit(im * sd))
}

/// Draws one block: `Ĥ` and `H̃` independently, then `H = Ĥ + H̃`.
///
/// Samples are drawn in `f64` and converted, so an `f32` and an `f64` draw
/// from identically seeded streams describe the same realization.
pub fn draw_realization<T: Real, R: Rng + ?Sized>(
    model: &CsitModel<T>,
    transmit_power: T,
    block_index: usize,
    rng: &mut R,
) -> Result<ChannelRealization<T>> {
    let error_power = model.error_powers(transmit_power)?;
    let (nt, k) = (model.num_tx_antennas, model.num_users);
    let mut estimated = CMatrix::zeros(nt, k);
    let mut error = CMatrix::zeros(nt, k);
    for user in 0..k {
        let est_var = model.channel_power[user] - error_power[user];
        for z in estimated.column_mut(user) {
            *z = cscg(rng, est_var);
        }
        for z in error.column_mut(user) {
            *z = cscg(rng, error_power[user]);
        }
    }
    let true_channel = estimated.add(&error)?;
    Ok(ChannelRealization {
        true_channel,
        estimated_channel: estimated,
        error_channel: error,
        block_index,
    })
}

/// The same block with perfect CSIT: `Ĥ = H`, `H̃ = 0`.
pub fn perfect_csit<T: Real>(realization: &ChannelRealization<T>) -> ChannelRealization<T> {
    let h = &realization.true_channel;
    ChannelRealization {
        true_channel: h.clone(),
        estimated_channel: h.clone(),
        error_channel: CMatrix::zeros(h.rows(), h.cols()),
        block_index: realization.block_index,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn error_power_examples() {
        let m = CsitModel::new(2, vec![2.0_f64; 3], 0.0, vec![1.0; 3]).unwrap();
        assert_eq!(m.error_powers(1.0).unwrap(), vec![1.0; 3]);

        let m = CsitModel::<f64>::uniform(8, 4, 0.6).unwrap();
        let e = m.error_powers(100.0).unwrap();
        assert!((e[0] - 0.063_095_734_448_019_33).abs() < 1e-15);
    }

    #[test]
    fn rejects_error_power_at_or_above_channel_power() {
        let m = CsitModel::<f64>::uniform(8, 4, 0.6).unwrap();
        let err = m.error_powers(1.0).unwrap_err();
        assert!(matches!(err, Error::CsitErrorTooLarge { user: 0, .. }));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(draw_realization(&m, 0.5, 0, &mut rng).is_err());
    }

    #[test]
    fn cap_keeps_low_power_points_valid() {
        let m = CsitModel::<f64>::uniform(8, 4, 0.6)
            .unwrap()
            .with_error_power_cap(0.99)
            .unwrap();
        assert_eq!(m.error_powers(1.0).unwrap(), vec![0.99; 4]);
        // Above the knee the cap is inactive.
        let e = m.error_powers(100.0).unwrap();
        assert!((e[0] - 100.0_f64.powf(-0.6)).abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive_transmit_power() {
        let m = CsitModel::<f64>::uniform(2, 1, 0.6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(draw_realization(&m, 0.0, 0, &mut rng).is_err());
        assert!(draw_realization(&m, -3.0, 0, &mut rng).is_err());
    }

    #[test]
    fn rejects_bad_model_parameters() {
        assert!(CsitModel::new(0, vec![1.0_f64], 0.6, vec![1.0]).is_err());
        assert!(CsitModel::new(2, vec![1.0_f64], -0.1, vec![1.0]).is_err());
        assert!(CsitModel::new(2, vec![0.0_f64], 0.6, vec![1.0]).is_err());
        assert!(CsitModel::new(2, vec![1.0_f64], 0.6, vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn decomposition_identity_holds() {
        let m = CsitModel::<f64>::uniform(8, 4, 0.6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for b in 0..50 {
            let r = draw_realization(&m, 31.6, b, &mut rng).unwrap();
            assert!(r.decomposition_residual() <= 1e-12);
            assert_eq!(r.block_index, b);
        }
    }

    #[test]
    fn perfect_csit_is_idempotent() {
        let m = CsitModel::<f64>::uniform(4, 2, 0.6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = draw_realization(&m, 10.0, 0, &mut rng).unwrap();
        let p = perfect_csit(&r);
        assert_eq!(p.estimated_channel, r.true_channel);
        assert_eq!(p.error_channel.max_abs(), 0.0);
        assert_eq!(perfect_csit(&p), p);
    }

    #[test]
    fn identical_seeds_replay_bit_identically() {
        let m = CsitModel::<f64>::uniform(8, 4, 0.6).unwrap();
        let a = draw_realization(&m, 100.0, 0, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        let b = draw_realization(&m, 100.0, 0, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        assert_eq!(a, b);
    }
}

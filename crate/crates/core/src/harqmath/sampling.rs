//! Decode outcome draws and Monte Carlo averaging of the HARQ-IR PER.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{harq_ir_per, DecodeAttempt};

/// How a packet error probability becomes a decode outcome.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DecodeMode {
    /// Success with probability `1 − PER`.
    #[default]
    Stochastic,
    /// Success iff `PER < 1/2`; no randomness consumed.
    Threshold,
}

impl DecodeMode {
    /// One decode outcome for a given PER. `Stochastic` draws exactly one
    /// uniform from `rng`.
    pub fn decide<R: Rng + ?Sized>(self, per: f64, rng: &mut R) -> bool {
        match self {
            DecodeMode::Stochastic => {
                let u: f64 = rng.random();
                u >= per
            }
            DecodeMode::Threshold => per < 0.5,
        }
    }
}

/// Samples the outcome of a HARQ-IR decode attempt.
pub fn sample_decode_outcome<T: Real, R: Rng + ?Sized>(
    attempt: &DecodeAttempt<T>,
    mode: DecodeMode,
    rng: &mut R,
) -> Result<bool> {
    let per = harq_ir_per(attempt)?.to_f64_lossy();
    Ok(mode.decide(per, rng))
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate<T> {
    pub mean: T,
    pub std_error: T,
    pub samples: usize,
}

/// Averages the HARQ-IR PER over SINR vectors drawn by `sampler`.
pub fn average_per_monte_carlo<T, R, S>(
    mut sampler: S,
    first_round_rate: T,
    rounds: usize,
    block_length: usize,
    num_samples: usize,
    rng: &mut R,
) -> Result<McEstimate<T>>
where
    T: Real,
    R: Rng + ?Sized,
    S: FnMut(&mut R) -> Vec<T>,
{
    if rounds == 0 || num_samples == 0 {
        return Err(Error::invalid("rounds/num_samples", "must be positive"));
    }
    let mut attempt = DecodeAttempt {
        sinr_history: Vec::with_capacity(rounds),
        first_round_rate,
        block_length,
    };
    // Welford accumulation in f64 regardless of T.
    let (mut mean, mut m2) = (0.0_f64, 0.0_f64);
    for i in 0..num_samples {
        attempt.sinr_history = sampler(rng);
        if attempt.sinr_history.len() != rounds {
            return Err(Error::DimensionMismatch(format!(
                "sampler returned {} SINRs for {rounds} rounds",
                attempt.sinr_history.len()
            )));
        }
        let p = harq_ir_per(&attempt)?.to_f64_lossy();
        let delta = p - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (p - mean);
    }
    let std_error = if num_samples > 1 {
        (m2 / (num_samples - 1) as f64 / num_samples as f64).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        mean: T::lit(mean.clamp(0.0, 1.0)),
        std_error: T::lit(std_error),
        samples: num_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn extreme_pers_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert!(DecodeMode::Stochastic.decide(0.0, &mut rng));
            assert!(!DecodeMode::Stochastic.decide(1.0, &mut rng));
        }
        assert!(DecodeMode::Threshold.decide(0.49, &mut rng));
        assert!(!DecodeMode::Threshold.decide(0.5, &mut rng));
    }

    #[test]
    fn failure_rate_concentrates() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let fails = (0..n)
            .filter(|_| !DecodeMode::Stochastic.decide(0.3, &mut rng))
            .count();
        let rate = fails as f64 / n as f64;
        let sd = (0.3 * 0.7 / n as f64).sqrt();
        assert!((rate - 0.3).abs() < 3.0 * sd, "rate = {rate}");
    }

    #[test]
    fn sample_outcome_follows_per() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sure = DecodeAttempt {
            sinr_history: vec![1e9_f64],
            first_round_rate: 1.0,
            block_length: 256,
        };
        assert!(sample_decode_outcome(&sure, DecodeMode::Stochastic, &mut rng).unwrap());
        let hopeless = DecodeAttempt {
            sinr_history: vec![0.01_f64],
            first_round_rate: 5.0,
            block_length: 256,
        };
        assert!(!sample_decode_outcome(&hopeless, DecodeMode::Stochastic, &mut rng).unwrap());
    }

    #[test]
    fn constant_sampler_has_zero_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let est = average_per_monte_carlo(|_r: &mut ChaCha8Rng| vec![1.0_f64, 0.5], 1.2, 2, 256, 500, &mut rng)
            .unwrap();
        let direct = harq_ir_per(&DecodeAttempt {
            sinr_history: vec![1.0, 0.5],
            first_round_rate: 1.2,
            block_length: 256,
        })
        .unwrap();
        assert!((est.mean - direct).abs() < 1e-12);
        assert!(est.std_error < 1e-12);
    }

    #[test]
    fn wrong_length_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = average_per_monte_carlo(|_r: &mut ChaCha8Rng| vec![1.0_f64], 1.0, 2, 256, 10, &mut rng);
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }
}

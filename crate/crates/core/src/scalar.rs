//! Scalar abstraction shared by the numeric modules.
//!
//! Channel generation, precoding, SINR evaluation and the HARQ error-rate
//! formulas are written once against [`Real`] and instantiated for `f32` and
//! `f64`. The protocol schedulers and the Monte Carlo harness run on `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Complementary error function.
    fn erfc(self) -> Self;

    /// Converts an `f64` literal. Every literal used in this crate is exactly
    /// representable or rounds sensibly, so this never fails for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("finite float converts to f64")
    }
}

impl Real for f64 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfc(self)
    }
}

impl Real for f32 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }
}

/// Standard normal tail probability `Q(x) = P(Z > x)`.
///
/// Evaluated through `erfc` on both sides of the origin so the relative
/// accuracy holds deep into either tail.
pub fn q_function<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    let z = x * T::FRAC_1_SQRT_2();
    if x >= T::zero() {
        half * z.erfc()
    } else {
        T::one() - half * (-z).erfc()
    }
}

/// Clamps a probability to `[0, 1]`, mapping NaN to 1.
pub(crate) fn clamp_probability<T: Real>(p: T) -> T {
    if p.is_nan() {
        T::one()
    } else {
        p.max(T::zero()).min(T::one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_function_reference_points() {
        assert!((q_function(0.0_f64) - 0.5).abs() < 1e-16);
        // Q(1.959963984540054) = 0.025
        assert!((q_function(1.959963984540054_f64) - 0.025).abs() < 1e-15);
        assert!((q_function(-1.959963984540054_f64) - 0.975).abs() < 1e-15);
        assert!(q_function(37.0_f64) > 0.0);
        assert!(q_function(37.0_f64) < 1e-298);
    }

    #[test]
    fn q_function_f32_tracks_f64() {
        for i in -40..=40 {
            let x = i as f64 * 0.1;
            let lo = q_function(x as f32) as f64;
            assert!((lo - q_function(x)).abs() < 1e-6, "x = {x}");
        }
    }

    #[test]
    fn clamp_probability_maps_nan_to_one() {
        assert_eq!(clamp_probability(f64::NAN), 1.0);
        assert_eq!(clamp_probability(-0.1_f64), 0.0);
        assert_eq!(clamp_probability(1.5_f64), 1.0);
    }
}

//! Average backtrack PER over a conditional SINR distribution and the
//! minimum retransmission length that reaches a target average PER.

use crate::error::{Error, Result};
use crate::scalar::{clamp_probability, Real};

use super::reduced_rate;

/// Parameters of the piecewise-linear stand-in for the Q-function term:
/// 1 below `ν`, `1/2 − λ(γ − ξ)` on `(ν, τ)`, 0 above `τ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurrogateParams<T> {
    /// `λ`; infinite for the step case `R̂ = 0`.
    pub slope: T,
    /// `ξ`.
    pub center: T,
    /// `ν`.
    pub lower_knee: T,
    /// `τ`.
    pub upper_knee: T,
}

impl<T: Real> SurrogateParams<T> {
    /// True for the `R̂ = 0` sentinel, where the surrogate is the indicator
    /// of `γ ≤ 0`.
    pub fn is_step(&self) -> bool {
        self.slope.is_infinite()
    }

    /// `Ξ(γ)`.
    pub fn eval(&self, sinr: T) -> T {
        if sinr <= self.lower_knee {
            T::one()
        } else if sinr >= self.upper_knee {
            T::zero()
        } else {
            T::lit(0.5) - self.slope * (sinr - self.center)
        }
    }
}

pub fn surrogate_params<T: Real>(reduced_rate: T, block_length: usize) -> Result<SurrogateParams<T>> {
    if !(reduced_rate.is_finite() && reduced_rate >= T::zero()) {
        return Err(Error::invalid("reduced_rate", "must be finite and nonnegative"));
    }
    if block_length == 0 {
        return Err(Error::invalid("block_length", "must be positive"));
    }
    if reduced_rate == T::zero() {
        return Ok(SurrogateParams {
            slope: T::infinity(),
            center: T::zero(),
            lower_knee: T::zero(),
            upper_knee: T::zero(),
        });
    }
    let ns = T::from_usize_lossy(block_length);
    let two = T::lit(2.0);
    // 2^(2R̂) − 1 via exp_m1 so small rates keep full precision.
    let spread = (two * reduced_rate * T::LN_2()).exp_m1();
    let slope = (ns / (two * T::PI() * spread)).sqrt();
    let center = reduced_rate.exp2() - T::one();
    let half = T::one() / (two * slope);
    Ok(SurrogateParams {
        slope,
        center,
        lower_knee: center - half,
        upper_knee: center + half,
    })
}

/// Conditional CDF `F(x)` of the first-round SINR given the CSIT.
pub trait ConditionalCdf<T: Real> {
    fn cdf(&self, x: T) -> T;

    /// Exact `∫_a^b F(x) dx` when available.
    fn integral(&self, _a: T, _b: T) -> Option<T> {
        None
    }
}

/// Adapts a closure to [`ConditionalCdf`].
pub struct CdfFn<F>(pub F);

impl<T: Real, F: Fn(T) -> T> ConditionalCdf<T> for CdfFn<F> {
    fn cdf(&self, x: T) -> T {
        (self.0)(x)
    }
}

/// Empirical CDF of a sample, linearly interpolated between the sorted
/// distinct sample values: 0 below the smallest sample, `i/n` at the `i`-th
/// order statistic (right-continuous on ties), 1 from the largest on.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCdf<T> {
    knots: Vec<T>,
    levels: Vec<T>,
    /// `∫_{knots[0]}^{knots[i]} F`.
    areas: Vec<T>,
}

impl<T: Real> EmpiricalCdf<T> {
    pub fn new(mut samples: Vec<T>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("samples", "need at least one sample"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("cdf samples"));
        }
        samples.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let n = T::from_usize_lossy(samples.len());
        let mut knots: Vec<T> = Vec::new();
        let mut levels: Vec<T> = Vec::new();
        for (i, &s) in samples.iter().enumerate() {
            let level = T::from_usize_lossy(i + 1) / n;
            if knots.last() == Some(&s) {
                *levels.last_mut().expect("nonempty") = level;
            } else {
                knots.push(s);
                levels.push(level);
            }
        }
        let mut areas = Vec::with_capacity(knots.len());
        areas.push(T::zero());
        for i in 1..knots.len() {
            let w = knots[i] - knots[i - 1];
            let prev = areas[i - 1];
            areas.push(prev + w * (levels[i - 1] + levels[i]) * T::lit(0.5));
        }
        Ok(EmpiricalCdf {
            knots,
            levels,
            areas,
        })
    }

    pub fn support(&self) -> (T, T) {
        (self.knots[0], *self.knots.last().expect("nonempty"))
    }

    /// Index of the last knot `<= x`, or None below the support.
    fn segment(&self, x: T) -> Option<usize> {
        let idx = self.knots.partition_point(|&k| k <= x);
        idx.checked_sub(1)
    }

    /// `∫_{-∞}^x F`.
    fn primitive(&self, x: T) -> T {
        match self.segment(x) {
            None => T::zero(),
            Some(i) if i + 1 == self.knots.len() => self.areas[i] + (x - self.knots[i]),
            Some(i) => {
                let fx = self.cdf(x);
                self.areas[i] + (x - self.knots[i]) * (self.levels[i] + fx) * T::lit(0.5)
            }
        }
    }
}

impl<T: Real> ConditionalCdf<T> for EmpiricalCdf<T> {
    fn cdf(&self, x: T) -> T {
        match self.segment(x) {
            None => T::zero(),
            Some(i) if i + 1 == self.knots.len() => T::one(),
            Some(i) => {
                let (x0, x1) = (self.knots[i], self.knots[i + 1]);
                let (y0, y1) = (self.levels[i], self.levels[i + 1]);
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        }
    }

    fn integral(&self, a: T, b: T) -> Option<T> {
        Some(self.primitive(b) - self.primitive(a))
    }
}

fn checked_cdf<T: Real, C: ConditionalCdf<T> + ?Sized>(cdf: &C, x: T) -> Result<T> {
    let v = cdf.cdf(x);
    if !(v >= T::zero() && v <= T::one()) {
        return Err(Error::CdfOutOfRange {
            at: x.to_f64_lossy(),
            value: v.to_f64_lossy(),
        });
    }
    Ok(v)
}

struct Simpson<'a, T, C: ?Sized> {
    cdf: &'a C,
    _marker: std::marker::PhantomData<T>,
}

impl<T: Real, C: ConditionalCdf<T> + ?Sized> Simpson<'_, T, C> {
    fn f(&self, x: T) -> Result<T> {
        checked_cdf(self.cdf, x)
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(&self, a: T, b: T, fa: T, fm: T, fb: T, whole: T, tol: T, depth: u32) -> Result<T> {
        let two = T::lit(2.0);
        let m = (a + b) / two;
        let lm = (a + m) / two;
        let rm = (m + b) / two;
        let flm = self.f(lm)?;
        let frm = self.f(rm)?;
        let six = T::lit(6.0);
        let left = (m - a) * (fa + T::lit(4.0) * flm + fm) / six;
        let right = (b - m) * (fm + T::lit(4.0) * frm + fb) / six;
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= T::lit(15.0) * tol {
            return Ok(left + right + delta / T::lit(15.0));
        }
        Ok(self.refine(a, m, fa, flm, fm, left, tol / two, depth - 1)?
            + self.refine(m, b, fm, frm, fb, right, tol / two, depth - 1)?)
    }

    fn integrate(&self, a: T, b: T, tol: T) -> Result<T> {
        let m = (a + b) / T::lit(2.0);
        let (fa, fm, fb) = (self.f(a)?, self.f(m)?, self.f(b)?);
        let whole = (b - a) * (fa + T::lit(4.0) * fm + fb) / T::lit(6.0);
        self.refine(a, b, fa, fm, fb, whole, tol, 40)
    }
}

/// `ε̄ᵇ ≈ λ ∫_ν^τ F(x) dx`, to absolute accuracy 1e−6 when the CDF has no
/// exact integral. The step sentinel returns `F(0)`.
pub fn average_backtrack_per<T: Real, C: ConditionalCdf<T> + ?Sized>(
    cdf: &C,
    params: &SurrogateParams<T>,
) -> Result<T> {
    if params.is_step() {
        return checked_cdf(cdf, T::zero());
    }
    let (a, b) = (params.lower_knee, params.upper_knee);
    checked_cdf(cdf, a)?;
    checked_cdf(cdf, b)?;
    let area = match cdf.integral(a, b) {
        Some(v) => v,
        None => {
            let tol = T::lit(1e-6) / params.slope;
            Simpson {
                cdf,
                _marker: std::marker::PhantomData,
            }
            .integrate(a, b, tol)?
        }
    };
    Ok(clamp_probability(params.slope * area))
}

/// Rounding slack when checking that the average PER does not rise with β.
const MONOTONE_SLACK: f64 = 1e-12;

/// Result of the minimum retransmission length search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RetxLength {
    pub bits: u32,
    /// The cap `⌈R·N_s⌉` was returned without reaching the target.
    pub saturated: bool,
}

/// Average backtrack PER after `prior + beta` credited bits.
fn avg_per_after<T: Real, C: ConditionalCdf<T> + ?Sized>(
    cdf: &C,
    original_rate: T,
    prior: u64,
    beta: u32,
    block_length: usize,
) -> Result<T> {
    let r_hat = reduced_rate(original_rate, prior + u64::from(beta), block_length);
    average_backtrack_per(cdf, &surrogate_params(r_hat, block_length)?)
}

/// Smallest `β ∈ [0, ⌈R·N_s⌉]` with average backtrack PER `≤ target_per`,
/// found by bisection.
pub fn min_retransmission_length<T: Real, C: ConditionalCdf<T> + ?Sized>(
    target_per: T,
    original_rate: T,
    prior_credits: &[u32],
    cdf: &C,
    block_length: usize,
) -> Result<RetxLength> {
    if !(target_per > T::zero() && target_per < T::one()) {
        return Err(Error::invalid("target_per", "must lie in (0, 1)"));
    }
    if !(original_rate.is_finite() && original_rate >= T::zero()) {
        return Err(Error::invalid("original_rate", "must be finite and nonnegative"));
    }
    if block_length == 0 {
        return Err(Error::invalid("block_length", "must be positive"));
    }
    let prior: u64 = prior_credits.iter().map(|&b| u64::from(b)).sum();
    let cap = (original_rate * T::from_usize_lossy(block_length))
        .ceil()
        .to_u32()
        .unwrap_or(u32::MAX);
    let eval = |beta: u32| avg_per_after(cdf, original_rate, prior, beta, block_length);

    let f_lo = eval(0)?;
    if f_lo <= target_per {
        return Ok(RetxLength {
            bits: 0,
            saturated: false,
        });
    }
    let f_hi = eval(cap)?;
    if f_hi > target_per {
        if f_hi > f_lo + T::lit(MONOTONE_SLACK) {
            return Err(Error::NonMonotone { beta: u64::from(cap) });
        }
        return Ok(RetxLength {
            bits: cap,
            saturated: true,
        });
    }
    // Invariant: eval(lo) > target >= eval(hi).
    let (mut lo, mut hi) = (0u32, cap);
    let (mut v_lo, mut v_hi) = (f_lo, f_hi);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let v = eval(mid)?;
        if v > v_lo + T::lit(MONOTONE_SLACK) || v < v_hi - T::lit(MONOTONE_SLACK) {
            return Err(Error::NonMonotone { beta: u64::from(mid) });
        }
        if v <= target_per {
            hi = mid;
            v_hi = v;
        } else {
            lo = mid;
            v_lo = v;
        }
    }
    Ok(RetxLength {
        bits: hi,
        saturated: false,
    })
}

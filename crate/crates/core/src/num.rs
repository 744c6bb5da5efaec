//! Scalar abstraction for the numerical kernel.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the numerical kernel is generic over (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal, rounding to the target precision.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in every Real")
    }

    /// Converts back to `f64` (lossless for both supported types).
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Numerically stable `ln(exp(a) + exp(b))`.
#[inline]
pub fn log_add_exp<F: Real>(a: F, b: F) -> F {
    if a == F::neg_infinity() {
        return b;
    }
    if b == F::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Numerically stable `ln(exp(a) - exp(b))` for `a >= b`.
#[inline]
pub fn log_sub_exp<F: Real>(a: F, b: F) -> F {
    if b == F::neg_infinity() {
        return a;
    }
    if b >= a {
        return F::neg_infinity();
    }
    a + log1mexp(b - a)
}

/// `ln(1 - exp(x))` for `x <= 0`.
#[inline]
pub fn log1mexp<F: Real>(x: F) -> F {
    if x > -F::LN_2() {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// Logistic-style ratio `exp(a) / (exp(a) + exp(b))` evaluated without overflow.
#[inline]
pub fn share_of<F: Real>(a: F, b: F) -> F {
    if a == F::neg_infinity() && b == F::neg_infinity() {
        return F::nan();
    }
    F::one() / (F::one() + (b - a).exp())
}

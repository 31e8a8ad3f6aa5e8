//! Floating-point abstraction shared by every numeric module.
//!
//! All model math is written against [`Real`], which is implemented for `f32`
//! and `f64`. Quantities that need extra range (log-gamma, random draws) are
//! evaluated in `f64` and converted back.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `log(1 + exp(u))` without overflow.
#[inline]
pub fn softplus<T: Real>(u: T) -> T {
    if u > lit(30.0) {
        u + (-u).exp().ln_1p()
    } else if u < lit(-30.0) {
        u.exp()
    } else {
        u.exp().ln_1p()
    }
}

/// `1 / (1 + exp(u))`.
#[inline]
pub fn logistic_complement<T: Real>(u: T) -> T {
    if u >= T::zero() {
        let e = (-u).exp();
        e / (T::one() + e)
    } else {
        T::one() / (T::one() + u.exp())
    }
}

/// Log-sum-exp over an iterator. Returns `-inf` for an empty input or when
/// every term is `-inf`.
pub fn log_sum_exp<T: Real, I: IntoIterator<Item = T>>(values: I) -> T {
    let values: Vec<T> = values.into_iter().collect();
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    if max == T::infinity() {
        return max;
    }
    let sum: T = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Natural log of the binomial coefficient `C(n, k)`, via log-gamma so it
/// stays finite for very large `n`.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    use statrs::function::gamma::ln_gamma;
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

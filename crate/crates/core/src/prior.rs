//! Configuration-space prior.
//!
//! The size prior is `f_n(s) ∝ c^{-s} p^{-a s}` on `s = 0..=R`. Within a size,
//! configurations are weighted by `D(S)^{-λ/(2s)}` with the normalizer over
//! all size-`s` configurations replaced by `C(p, s)`; models whose Gram
//! condition number exceeds `kappa_max` get zero mass.

use serde::{Deserialize, Serialize};

use crate::error::{EcapError, Result};
use crate::model::GramEigen;
use crate::scalar::{lit, ln_binomial, Real};

pub const DEFAULT_KAPPA_MAX: f64 = 1e8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig<T> {
    /// Size-penalty exponent.
    pub a: T,
    pub c: T,
    pub p: usize,
    /// Largest admissible configuration size.
    pub rank_cap: usize,
    /// Condition-number exclusion threshold.
    pub kappa_max: T,
}

impl<T: Real> PriorConfig<T> {
    pub fn new(a: T, c: T, p: usize, rank_cap: usize, kappa_max: T) -> Result<Self> {
        let pc = PriorConfig { a, c, p, rank_cap, kappa_max };
        pc.validate()?;
        Ok(pc)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > T::zero()) || !(self.c > T::zero()) {
            return Err(EcapError::InvalidArgument(format!("prior needs a > 0 and c > 0 (a = {}, c = {})", self.a, self.c)));
        }
        if !(self.kappa_max > T::one()) {
            return Err(EcapError::InvalidArgument(format!("kappa_max must exceed 1 (got {})", self.kappa_max)));
        }
        if self.rank_cap > self.p || self.rank_cap == 0 {
            return Err(EcapError::InvalidArgument(format!("rank cap {} must lie in 1..={}", self.rank_cap, self.p)));
        }
        Ok(())
    }

    /// `log(c p^a)`: the size penalty per added predictor.
    pub fn log_size_step(&self) -> T {
        self.c.ln() + self.a * lit::<T>(self.p as f64).ln()
    }
}

/// Unnormalized `log f_n(s)`; `-inf` above the rank cap.
pub fn log_size_prior<T: Real>(s: usize, pc: &PriorConfig<T>) -> T {
    if s > pc.rank_cap {
        return T::neg_infinity();
    }
    -lit::<T>(s as f64) * pc.log_size_step()
}

/// `-(λ / 2s) log D(S)`, the correlation-adaptive weight.
#[inline]
pub fn log_det_weight<T: Real>(ge: &GramEigen<T>, lambda: T) -> T {
    -lambda / lit(2.0 * ge.size() as f64) * ge.logdet
}

/// `log π_λ(S)` under the binomial approximation of the within-size
/// normalizer. Filtered models return `-inf`.
pub fn log_config_prior<T: Real>(ge: &GramEigen<T>, pc: &PriorConfig<T>, lambda: T) -> T {
    let s = ge.size();
    if s > pc.rank_cap || !(ge.kappa <= pc.kappa_max) {
        return T::neg_infinity();
    }
    log_det_weight(ge, lambda) - lit::<T>(ln_binomial(pc.p, s)) + log_size_prior(s, pc)
}

/// Prior of the empty configuration: `log f_n(0) = 0`.
pub fn log_null_prior<T: Real>() -> T {
    T::zero()
}

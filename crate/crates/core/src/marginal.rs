//! Closed-form log marginal likelihood under the α-powered likelihood and the
//! correlation-adaptive conjugate prior, and the unnormalized log posterior
//! of a configuration.
//!
//! For a configuration `S` with Gram eigenvalues `d_i` and rotated
//! least-squares coefficients `θ = Γ^T β̂_S`, writing
//! `w_i = α g k_S d_i^{λ+1}`:
//!
//! ```text
//! log m(y|S) = -(n/2) log(2πσ²) - ½ Σ log(1 + w_i)
//!              - α/(2σ²) [ RSS_S + (1-φ)² Σ d_i θ_i² / (1 + w_i) ]
//! ```
//!
//! `w_i` is only ever formed through its logarithm, so extreme spectra and
//! large `|λ|` stay finite.

use std::num::NonZeroUsize;
use std::sync::Mutex;

use lru::LruCache;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{EcapError, Result};
use crate::model::{gram_eigen, least_squares, Configuration, GramEigen, LeastSquaresFit};
use crate::prior::{log_config_prior, log_null_prior, PriorConfig};
use crate::scalar::{lit, logistic_complement, softplus, Real};
use crate::tuning::estimate_g;

pub const DEFAULT_ALPHA: f64 = 0.999;
pub const DEFAULT_CACHE_CAPACITY: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams<T> {
    pub lambda: T,
    pub g: T,
    pub phi: T,
    pub alpha: T,
    pub sigma2: T,
}

impl<T: Real> Hyperparams<T> {
    pub fn new(lambda: T, g: T, phi: T, alpha: T, sigma2: T) -> Result<Self> {
        let h = Hyperparams { lambda, g, phi, alpha, sigma2 };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(EcapError::InvalidArgument(what.to_string()));
        if !self.lambda.is_finite() {
            return bad("lambda must be finite");
        }
        if !(self.g > T::zero()) || !self.g.is_finite() {
            return bad("g must be positive and finite");
        }
        if !(self.phi >= T::zero() && self.phi < T::one()) {
            return bad("phi must lie in [0, 1)");
        }
        if !(self.alpha > T::zero() && self.alpha < T::one()) {
            return bad("alpha must lie in (0, 1)");
        }
        if !(self.sigma2 > T::zero()) || !self.sigma2.is_finite() {
            return bad("sigma2 must be positive and finite");
        }
        Ok(())
    }
}

/// Additive pieces of `log m(y|S)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalTerms<T> {
    /// `-(n/2) log(2πσ²)`
    pub constant: T,
    /// `½ Σ log(1 + w_i)`
    pub log_det_penalty: T,
    /// `RSS_S`
    pub rss: T,
    /// `(1-φ)² Σ d_i θ_i² / (1 + w_i)`
    pub shrink: T,
    /// `α / (2σ²)`
    pub quad_scale: T,
}

impl<T: Real> MarginalTerms<T> {
    pub fn total(&self) -> T {
        self.constant - self.log_det_penalty - self.quad_scale * (self.rss + self.shrink)
    }
}

/// Evaluates the marginal pieces from an eigensystem and fit.
pub fn marginal_terms<T: Real>(n: usize, ge: &GramEigen<T>, ls: &LeastSquaresFit<T>, h: &Hyperparams<T>) -> MarginalTerms<T> {
    let log_k = ge.log_k(h.lambda);
    let base = h.alpha.ln() + h.g.ln() + log_k;
    let lp1 = h.lambda + T::one();
    let mut penalty = T::zero();
    let mut shrink = T::zero();
    for ((&d, &log_d), &theta) in ge.d.iter().zip(&ge.log_d).zip(&ls.theta) {
        let u = base + lp1 * log_d;
        penalty = penalty + softplus(u);
        shrink = shrink + d * theta * theta * logistic_complement(u);
    }
    let one_minus_phi = T::one() - h.phi;
    MarginalTerms {
        constant: -lit::<T>(n as f64 / 2.0) * (lit::<T>(2.0) * T::PI() * h.sigma2).ln(),
        log_det_penalty: lit::<T>(0.5) * penalty,
        rss: ls.rss,
        shrink: one_minus_phi * one_minus_phi * shrink,
        quad_scale: h.alpha / (lit::<T>(2.0) * h.sigma2),
    }
}

/// `log m_λ(y | S)` for a non-empty configuration.
pub fn log_marginal<T: Real>(data: &Dataset<T>, ge: &GramEigen<T>, ls: &LeastSquaresFit<T>, h: &Hyperparams<T>) -> Result<T> {
    let v = marginal_terms(data.n(), ge, ls, h).total();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EcapError::NonFiniteScore(format!(
            "log marginal = {} (lambda = {}, g = {}, sigma2 = {})",
            v, h.lambda, h.g, h.sigma2
        )))
    }
}

/// `log m(y | ∅) = -(n/2) log(2πσ²) - α ||y||² / (2σ²)`.
pub fn log_null_marginal<T: Real>(data: &Dataset<T>, h: &Hyperparams<T>) -> T {
    -lit::<T>(data.n() as f64 / 2.0) * (lit::<T>(2.0) * T::PI() * h.sigma2).ln()
        - h.alpha / (lit::<T>(2.0) * h.sigma2) * data.y_norm_sq()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterReason {
    SizeCap,
    Singular,
    ConditionNumber,
    NonFinite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredModel<T> {
    pub config: Configuration,
    pub log_marginal: T,
    pub log_prior: T,
    /// `log_marginal + log_prior`; `-inf` iff filtered.
    pub log_score: T,
    /// The `g` used for this model (per-model estimate or the global value).
    pub g: T,
    pub terms: Option<MarginalTerms<T>>,
    pub filtered: Option<FilterReason>,
}

impl<T: Real> ScoredModel<T> {
    fn filtered(config: Configuration, reason: FilterReason, g: T) -> Self {
        ScoredModel {
            config,
            log_marginal: T::neg_infinity(),
            log_prior: T::neg_infinity(),
            log_score: T::neg_infinity(),
            g,
            terms: None,
            filtered: Some(reason),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.filtered.is_none()
    }
}

/// How `g` is chosen when scoring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GMode {
    /// Local empirical Bayes: maximize the marginal over `g` for each model.
    #[default]
    PerModel,
    /// Use `Hyperparams::g` for every model.
    Global,
}

/// Scores a single configuration with no caching.
pub fn score<T: Real>(data: &Dataset<T>, s: &Configuration, h: &Hyperparams<T>, pc: &PriorConfig<T>, g_mode: GMode) -> ScoredModel<T> {
    if s.is_empty() {
        let lm = log_null_marginal(data, h);
        let lp = log_null_prior::<T>();
        return ScoredModel {
            config: s.clone(),
            log_marginal: lm,
            log_prior: lp,
            log_score: lm + lp,
            g: h.g,
            terms: None,
            filtered: None,
        };
    }
    if s.size() > pc.rank_cap || s.size() >= data.n() {
        return ScoredModel::filtered(s.clone(), FilterReason::SizeCap, h.g);
    }
    let ge = match gram_eigen(data, s) {
        Ok(ge) => ge,
        Err(_) => return ScoredModel::filtered(s.clone(), FilterReason::Singular, h.g),
    };
    if !(ge.kappa <= pc.kappa_max) {
        return ScoredModel::filtered(s.clone(), FilterReason::ConditionNumber, h.g);
    }
    let ls = least_squares(data, s, &ge);
    let g = match g_mode {
        GMode::Global => h.g,
        GMode::PerModel => estimate_g(data, &ge, &ls, h),
    };
    let hm = Hyperparams { g, ..*h };
    let terms = marginal_terms(data.n(), &ge, &ls, &hm);
    let lm = terms.total();
    let lp = log_config_prior(&ge, pc, h.lambda);
    if !lm.is_finite() || !lp.is_finite() {
        return ScoredModel::filtered(s.clone(), FilterReason::NonFinite, g);
    }
    ScoredModel { config: s.clone(), log_marginal: lm, log_prior: lp, log_score: lm + lp, g, terms: Some(terms), filtered: None }
}

/// Memoizing scorer for one dataset and one hyperparameter setting.
///
/// The cache is keyed by configuration only; a `Scorer` never changes its
/// hyperparameters, so `(S, λ, g, φ)` keys reduce to `S`. It is safe to share
/// between threads: scoring is pure, so interleaving cannot change results.
pub struct Scorer<'a, T: Real> {
    data: &'a Dataset<T>,
    hyper: Hyperparams<T>,
    prior: PriorConfig<T>,
    g_mode: GMode,
    cache: Mutex<LruCache<Configuration, ScoredModel<T>>>,
}

impl<'a, T: Real> Scorer<'a, T> {
    pub fn new(data: &'a Dataset<T>, hyper: Hyperparams<T>, prior: PriorConfig<T>, g_mode: GMode) -> Self {
        Self::with_capacity(data, hyper, prior, g_mode, DEFAULT_CACHE_CAPACITY)
    }

    pub fn with_capacity(data: &'a Dataset<T>, hyper: Hyperparams<T>, prior: PriorConfig<T>, g_mode: GMode, capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).unwrap();
        Scorer { data, hyper, prior, g_mode, cache: Mutex::new(LruCache::new(cap)) }
    }

    pub fn data(&self) -> &'a Dataset<T> {
        self.data
    }

    pub fn hyper(&self) -> &Hyperparams<T> {
        &self.hyper
    }

    pub fn prior(&self) -> &PriorConfig<T> {
        &self.prior
    }

    pub fn g_mode(&self) -> GMode {
        self.g_mode
    }

    pub fn score(&self, s: &Configuration) -> ScoredModel<T> {
        if let Some(hit) = self.cache.lock().unwrap().get(s) {
            return hit.clone();
        }
        let scored = score(self.data, s, &self.hyper, &self.prior, self.g_mode);
        self.cache.lock().unwrap().put(s.clone(), scored.clone());
        scored
    }

    /// Only the log score, avoiding a clone of the cached entry's terms.
    pub fn log_score(&self, s: &Configuration) -> T {
        if let Some(hit) = self.cache.lock().unwrap().get(s) {
            return hit.log_score;
        }
        self.score(s).log_score
    }

    pub fn cached_len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }
}

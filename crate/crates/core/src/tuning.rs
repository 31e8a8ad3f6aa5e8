//! Empirical-Bayes choice of the hyperparameters.
//!
//! * `λ` maximizes an importance-sampling approximation of the marginal
//!   `log m_λ(y)`, using draws from `π₀(S) ∝ f_n(|S|) / C(p, |S|)` shared
//!   across the whole grid.
//! * `g` maximizes the marginal of a fixed configuration (local EB).
//! * `φ` is a James–Stein type plug-in from the adaptive-lasso model,
//!   capped at 0.7.
//! * `α = 0.999`, `a = 0.05`, `c = 1` by default.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{EcapError, Result};
use crate::lasso::{adaptive_lasso, AdaptiveLassoFit, PathCriterion};
use crate::marginal::{marginal_terms, Hyperparams};
use crate::model::{gram_eigen, least_squares, Configuration, GramEigen, LeastSquaresFit};
use crate::prior::{log_det_weight, log_size_prior, PriorConfig};
use crate::rng::{stream, Stream};
use crate::scalar::{lit, ln_binomial, log_sum_exp, to_f64, Real};

pub const DEFAULT_A: f64 = 0.05;
pub const DEFAULT_C: f64 = 1.0;
pub const PHI_CAP: f64 = 0.7;
pub const DEFAULT_IMPORTANCE_SAMPLES: usize = 500;
pub const G_MIN: f64 = 1e-4;
pub const G_MAX: f64 = 1e8;
const G_SCAN_PER_DECADE: usize = 4;

/// `(α, a, c)`.
pub fn default_hyperparams<T: Real>() -> (T, T, T) {
    (lit(crate::marginal::DEFAULT_ALPHA), lit(DEFAULT_A), lit(DEFAULT_C))
}

/// Default λ grid: -2.0 to 2.0 in steps of 0.1.
pub fn default_lambda_grid<T: Real>() -> Vec<T> {
    lambda_grid(-2.0, 2.0, 0.1)
}

/// Evenly spaced grid from `lo` to `hi` inclusive, built from integer steps
/// so the endpoints are exact.
pub fn lambda_grid<T: Real>(lo: f64, hi: f64, step: f64) -> Vec<T> {
    if !(step > 0.0) || hi < lo {
        return Vec::new();
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=count).map(|k| lit(lo + k as f64 * step)).collect()
}

// ---------------------------------------------------------------------------
// g

/// `log m(y|S)` as a function of `t = log g`, with everything else frozen.
struct GObjective<T> {
    base: Vec<T>,
    weights: Vec<T>,
    quad: T,
}

impl<T: Real> GObjective<T> {
    fn new(ge: &GramEigen<T>, ls: &LeastSquaresFit<T>, h: &Hyperparams<T>) -> Self {
        let log_k = ge.log_k(h.lambda);
        let lp1 = h.lambda + T::one();
        let shrink = (T::one() - h.phi) * (T::one() - h.phi);
        GObjective {
            base: ge.log_d.iter().map(|&l| h.alpha.ln() + log_k + lp1 * l).collect(),
            weights: ge.d.iter().zip(&ls.theta).map(|(&d, &t)| shrink * d * t * t).collect(),
            quad: h.alpha / (lit::<T>(2.0) * h.sigma2),
        }
    }

    /// The g-dependent part of the log marginal.
    fn eval(&self, t: T) -> T {
        self.eval_with_derivatives(t).0
    }

    /// Values on a scan grid. Within a safe exponent range `e^u` is formed as
    /// `e^b e^t`, one exponential per grid point instead of one per term.
    fn scan(&self, ts: &[T]) -> Vec<T> {
        let limit = lit::<T>(0.25) * T::max_value().ln();
        let (lo, hi) = (ts[0], ts[ts.len() - 1]);
        if !self.base.iter().all(|&b| (b + lo).abs() < limit && (b + hi).abs() < limit) {
            return ts.iter().map(|&t| self.eval(t)).collect();
        }
        let half: T = lit(0.5);
        let eb: Vec<T> = self.base.iter().map(|b| b.exp()).collect();
        ts.iter()
            .map(|&t| {
                let et = t.exp();
                let mut v = T::zero();
                for (&e, &w) in eb.iter().zip(&self.weights) {
                    let x = e * et;
                    v = v - half * x.ln_1p() - self.quad * w / (T::one() + x);
                }
                v
            })
            .collect()
    }

    /// Value and first two derivatives in `t`.
    fn eval_with_derivatives(&self, t: T) -> (T, T, T) {
        let half: T = lit(0.5);
        let (mut v, mut d1, mut d2) = (T::zero(), T::zero(), T::zero());
        for (&b, &w) in self.base.iter().zip(&self.weights) {
            let u = b + t;
            let e = (-u.abs()).exp();
            let inv = T::one() / (T::one() + e);
            // sig = 1/(1+e^-u), sc = 1 - sig, both without cancellation
            let (sig, sc) = if u >= T::zero() { (inv, e * inv) } else { (e * inv, inv) };
            let sp = u.max(T::zero()) + e.ln_1p();
            let qw = self.quad * w;
            v = v - half * sp - qw * sc;
            d1 = d1 - half * sig + qw * sig * sc;
            d2 = d2 - half * sig * sc + qw * sig * sc * (sc - sig);
        }
        (v, d1, d2)
    }
}

/// Local empirical-Bayes `ĝ_S = argmax_g m_λ(y|S)` over `[1e-4, 1e8]`:
/// a log-spaced scan, then a safeguarded Newton search on the derivative
/// inside the best scan cell. The result never scores below the best scan
/// point.
pub fn estimate_g<T: Real>(_data: &Dataset<T>, ge: &GramEigen<T>, ls: &LeastSquaresFit<T>, h: &Hyperparams<T>) -> T {
    let obj = GObjective::new(ge, ls, h);
    maximize_log_g(&obj).exp()
}

fn maximize_log_g<T: Real>(obj: &GObjective<T>) -> T {
    let lo = G_MIN.ln();
    let hi = G_MAX.ln();
    let decades = (G_MAX / G_MIN).log10();
    let steps = (decades * G_SCAN_PER_DECADE as f64).round() as usize;
    let ts: Vec<T> = (0..=steps).map(|k| lit(lo + (hi - lo) * k as f64 / steps as f64)).collect();
    let vals = obj.scan(&ts);
    let mut best = 0;
    for k in 1..ts.len() {
        if vals[k] > vals[best] {
            best = k;
        }
    }
    let mut a = ts[best.saturating_sub(1)];
    let mut b = ts[(best + 1).min(ts.len() - 1)];
    let tol: T = lit::<T>(1e-10).max(T::epsilon() * lit(64.0));
    let mut x = ts[best];
    for _ in 0..100 {
        let (_, d1, d2) = obj.eval_with_derivatives(x);
        if d1 > T::zero() {
            a = x;
        } else {
            b = x;
        }
        let newton = x - d1 / d2;
        let next = if d2 < T::zero() && newton > a && newton < b { newton } else { (a + b) / lit(2.0) };
        let step = (next - x).abs();
        x = next;
        if step <= tol || b - a <= tol {
            break;
        }
    }
    if obj.eval(x) >= vals[best] {
        x
    } else {
        ts[best]
    }
}

// ---------------------------------------------------------------------------
// phi

#[derive(Clone, Debug)]
pub struct PhiEstimate<T> {
    /// Positive-part James–Stein value before the cap.
    pub phi_hat: T,
    /// `min(phi_hat, 0.7)`.
    pub phi_tilde: T,
}

/// `φ̂ = [1 - 2σ̂² t / (||β̂||² + σ̂² t)]⁺` with `t = tr{(X_Ŝ^T X_Ŝ)^{-1}}`,
/// then capped at 0.7.
pub fn phi_from_parts<T: Real>(beta_norm_sq: T, sigma2: T, trace_inv: T) -> PhiEstimate<T> {
    let st = sigma2 * trace_inv;
    let raw = T::one() - lit::<T>(2.0) * st / (beta_norm_sq + st);
    let phi_hat = if raw.is_finite() { raw.max(T::zero()) } else { T::zero() };
    PhiEstimate { phi_hat, phi_tilde: phi_hat.min(lit(PHI_CAP)) }
}

/// φ estimate from an already computed adaptive-lasso fit.
pub fn phi_from_fit<T: Real>(data: &Dataset<T>, fit: &AdaptiveLassoFit<T>) -> PhiEstimate<T> {
    if fit.empty {
        return PhiEstimate { phi_hat: T::zero(), phi_tilde: T::zero() };
    }
    let ge = gram_eigen(data, &fit.support).expect("adaptive-lasso support is nonsingular");
    let beta_sq = fit.beta.iter().map(|&b| b * b).sum();
    phi_from_parts(beta_sq, fit.sigma2, ge.trace_inv)
}

/// Runs the adaptive lasso and returns `φ̃`.
pub fn estimate_phi<T: Real>(data: &Dataset<T>, criterion: PathCriterion) -> T {
    let fit = adaptive_lasso(data, criterion);
    phi_from_fit(data, &fit).phi_tilde
}

// ---------------------------------------------------------------------------
// lambda

/// Configurations with log importance weights. Draws from `π₀` carry weight
/// zero; exhaustive sets carry `log π₀(S)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ImportanceSet {
    pub configs: Vec<Configuration>,
    pub log_weights: Vec<f64>,
}

/// `N` independent draws from `π₀`: a size from the normalized `f_n` on
/// `1..=R`, then a uniform subset of that size.
pub fn sample_pi0<T: Real, R: Rng + ?Sized>(pc: &PriorConfig<T>, n_samples: usize, rng: &mut R) -> Vec<Configuration> {
    let log_mass: Vec<f64> = (1..=pc.rank_cap).map(|s| to_f64(log_size_prior(s, pc))).collect();
    let lse = log_sum_exp(log_mass.iter().copied());
    let mut cdf = Vec::with_capacity(log_mass.len());
    let mut acc = 0.0;
    for &lm in &log_mass {
        acc += (lm - lse).exp();
        cdf.push(acc);
    }
    (0..n_samples)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * acc;
            let size = cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1) + 1;
            let mut idx = sample_indices(rng, pc.p, size).into_vec();
            idx.sort_unstable();
            Configuration::from_sorted(idx)
        })
        .collect()
}

impl ImportanceSet {
    pub fn from_draws(configs: Vec<Configuration>) -> Self {
        let n = configs.len();
        ImportanceSet { configs, log_weights: vec![0.0; n] }
    }

    /// Every configuration of size `1..=R`, weighted by `π₀`. Only for small p.
    pub fn exhaustive<T: Real>(pc: &PriorConfig<T>) -> Result<Self> {
        if pc.p > 20 {
            return Err(EcapError::TooLarge(pc.p));
        }
        let mut configs = Vec::new();
        let mut log_weights = Vec::new();
        for mask in 1u32..(1u32 << pc.p) {
            let idx: Vec<usize> = (0..pc.p).filter(|&j| mask & (1 << j) != 0).collect();
            if idx.len() > pc.rank_cap {
                continue;
            }
            log_weights.push(to_f64(log_size_prior(idx.len(), pc)) - ln_binomial(pc.p, idx.len()));
            configs.push(Configuration::from_sorted(idx));
        }
        Ok(ImportanceSet { configs, log_weights })
    }
}

/// Where `g` comes from while the λ objective is evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaG<T> {
    Fixed(T),
    /// `ĝ` of this configuration, re-estimated at each grid λ.
    Reference(Configuration),
    /// Each sampled configuration uses its own `ĝ` at each grid λ.
    PerSample,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LambdaObjective<T> {
    pub grid: Vec<T>,
    /// Approximate `log m_λ(y)` per grid point.
    pub values: Vec<T>,
    /// The `g` used at each grid point.
    pub g: Vec<T>,
    pub n_samples: usize,
    pub seed: Option<u64>,
    pub samples: ImportanceSet,
}

struct PreparedSample<T> {
    log_weight: T,
    ge: GramEigen<T>,
    ls: LeastSquaresFit<T>,
}

fn prepare<T: Real>(data: &Dataset<T>, pc: &PriorConfig<T>, set: &ImportanceSet) -> Vec<PreparedSample<T>> {
    set.configs
        .par_iter()
        .zip(&set.log_weights)
        .filter_map(|(s, &lw)| {
            if s.is_empty() || s.size() > pc.rank_cap || s.size() >= data.n() {
                return None;
            }
            let ge = gram_eigen(data, s).ok()?;
            if !(ge.kappa <= pc.kappa_max) {
                return None;
            }
            let ls = least_squares(data, s, &ge);
            Some(PreparedSample { log_weight: lit(lw), ge, ls })
        })
        .collect()
}

fn g_at<T: Real>(data: &Dataset<T>, source: &LambdaG<T>, reference: &Option<(GramEigen<T>, LeastSquaresFit<T>)>, h: &Hyperparams<T>) -> T {
    match (source, reference) {
        (LambdaG::Fixed(g), _) => *g,
        (LambdaG::Reference(_), Some((ge, ls))) => estimate_g(data, ge, ls, h),
        (LambdaG::Reference(_), None) | (LambdaG::PerSample, _) => h.g,
    }
}

/// Evaluates `log m_λ(y) ≈ log Σ w m(y|S) D^{-λ/2s} - log Σ w D^{-λ/2s}` on
/// every grid point using one shared sample set.
pub fn lambda_objective<T: Real>(
    data: &Dataset<T>,
    h_partial: &Hyperparams<T>,
    pc: &PriorConfig<T>,
    grid: &[T],
    set: &ImportanceSet,
    g_source: &LambdaG<T>,
) -> Result<LambdaObjective<T>> {
    if grid.is_empty() {
        return Err(EcapError::InvalidArgument("lambda grid is empty".into()));
    }
    let prepared = prepare(data, pc, set);
    let reference = match g_source {
        LambdaG::Reference(s) if !s.is_empty() => {
            let ge = gram_eigen(data, s)?;
            let ls = least_squares(data, s, &ge);
            Some((ge, ls))
        }
        _ => None,
    };
    let n = data.n();
    let evaluated: Vec<(T, T)> = grid
        .par_iter()
        .map(|&lambda| {
            let h = Hyperparams { lambda, ..*h_partial };
            let g = g_at(data, g_source, &reference, &h);
            let h = Hyperparams { g, ..h };
            let mut num = Vec::with_capacity(prepared.len());
            let mut den = Vec::with_capacity(prepared.len());
            for ps in &prepared {
                let prior_part = ps.log_weight + log_det_weight(&ps.ge, lambda);
                let lm = if matches!(g_source, LambdaG::PerSample) {
                    let hs = Hyperparams { g: estimate_g(data, &ps.ge, &ps.ls, &h), ..h };
                    marginal_terms(n, &ps.ge, &ps.ls, &hs).total()
                } else {
                    marginal_terms(n, &ps.ge, &ps.ls, &h).total()
                };
                num.push(prior_part + lm);
                den.push(prior_part);
            }
            let value = log_sum_exp(num) - log_sum_exp(den);
            (if value.is_nan() { T::neg_infinity() } else { value }, g)
        })
        .collect();
    let (values, gs): (Vec<T>, Vec<T>) = evaluated.into_iter().unzip();
    Ok(LambdaObjective { grid: grid.to_vec(), values, g: gs, n_samples: set.configs.len(), seed: None, samples: set.clone() })
}

/// Grid argmax; ties go to the smaller `|λ|`, then the smaller `λ`.
pub fn argmax_lambda<T: Real>(obj: &LambdaObjective<T>) -> Result<T> {
    let mut best: Option<usize> = None;
    for (k, &v) in obj.values.iter().enumerate() {
        if !v.is_finite() {
            continue;
        }
        best = match best {
            None => Some(k),
            Some(b) => {
                let (vb, lb, lk) = (obj.values[b], obj.grid[b], obj.grid[k]);
                let better = v > vb || (v == vb && (lk.abs() < lb.abs() || (lk.abs() == lb.abs() && lk < lb)));
                Some(if better { k } else { b })
            }
        };
    }
    best.map(|k| obj.grid[k]).ok_or(EcapError::DegenerateObjective)
}

/// Draws `n_samples` configurations from `π₀` with `seed` and returns the
/// grid maximizer of the approximated marginal.
pub fn estimate_lambda<T: Real>(
    data: &Dataset<T>,
    h_partial: &Hyperparams<T>,
    pc: &PriorConfig<T>,
    grid: &[T],
    n_samples: usize,
    seed: u64,
    g_source: &LambdaG<T>,
) -> Result<(T, LambdaObjective<T>)> {
    let mut rng = stream(seed, Stream::ImportanceSampling, 0);
    let set = ImportanceSet::from_draws(sample_pi0(pc, n_samples, &mut rng));
    let mut obj = lambda_objective(data, h_partial, pc, grid, &set, g_source)?;
    obj.seed = Some(seed);
    Ok((argmax_lambda(&obj)?, obj))
}

// ---------------------------------------------------------------------------
// pipeline

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaChoice {
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningSettings {
    pub alpha: f64,
    pub a: f64,
    pub c: f64,
    pub kappa_max: f64,
    /// `None` uses `min(n - 1, p)`.
    pub rank_cap: Option<usize>,
    pub lambda: LambdaChoice,
    pub lambda_grid: Vec<f64>,
    pub importance_samples: usize,
    /// Replaces the plug-in `φ̃` when set.
    pub phi: Option<f64>,
    /// Replaces the adaptive-lasso `σ̂²` when set.
    pub sigma2: Option<f64>,
    /// Level selection along the adaptive-lasso paths.
    pub path_criterion: PathCriterion,
}

impl Default for TuningSettings {
    fn default() -> Self {
        let (alpha, a, c) = default_hyperparams::<f64>();
        TuningSettings {
            alpha,
            a,
            c,
            kappa_max: crate::prior::DEFAULT_KAPPA_MAX,
            rank_cap: None,
            lambda: LambdaChoice::Auto,
            lambda_grid: default_lambda_grid(),
            importance_samples: DEFAULT_IMPORTANCE_SAMPLES,
            phi: None,
            sigma2: None,
            path_criterion: PathCriterion::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Tuned<T> {
    pub hyper: Hyperparams<T>,
    pub prior: PriorConfig<T>,
    pub phi: PhiEstimate<T>,
    pub lambda_objective: Option<LambdaObjective<T>>,
    pub alasso: AdaptiveLassoFit<T>,
}

/// Fallback `g` when the adaptive lasso selects nothing: unit information.
fn fallback_g<T: Real>(data: &Dataset<T>) -> T {
    lit(data.n() as f64)
}

/// σ̂² and φ̃ from the adaptive lasso, then λ̂ with `g` held at the
/// adaptive-lasso model's `ĝ` for λ = 0, then a global `g` re-estimated at λ̂.
pub fn tune<T: Real>(data: &Dataset<T>, settings: &TuningSettings, seed: u64) -> Result<Tuned<T>> {
    let rank_cap = settings.rank_cap.unwrap_or_else(|| data.default_rank_cap()).min(data.p());
    let prior = PriorConfig::new(lit(settings.a), lit(settings.c), data.p(), rank_cap, lit(settings.kappa_max))?;
    let alasso = adaptive_lasso(data, settings.path_criterion);
    let sigma2 = settings.sigma2.map(lit).unwrap_or(alasso.sigma2);
    let phi = match settings.phi {
        Some(v) => {
            let v = lit::<T>(v);
            PhiEstimate { phi_hat: v, phi_tilde: v }
        }
        None => phi_from_fit(data, &alasso),
    };
    let mut partial = Hyperparams::new(T::zero(), fallback_g(data), phi.phi_tilde, lit(settings.alpha), sigma2)?;
    let reference = if alasso.empty {
        None
    } else {
        let ge = gram_eigen(data, &alasso.support)?;
        let ls = least_squares(data, &alasso.support, &ge);
        Some((ge, ls))
    };
    // One g for the whole λ grid, taken at the neutral λ = 0. Letting it
    // follow λ makes the objective track how g suits the sampled models
    // rather than the correlation structure.
    if let Some((ge, ls)) = &reference {
        partial.g = estimate_g(data, ge, ls, &partial);
    }
    let g_source = LambdaG::Fixed(partial.g);
    let (lambda, objective) = match settings.lambda {
        LambdaChoice::Fixed(v) => (lit(v), None),
        LambdaChoice::Auto => {
            let grid: Vec<T> = settings.lambda_grid.iter().map(|&v| lit(v)).collect();
            let (l, obj) = estimate_lambda(data, &partial, &prior, &grid, settings.importance_samples, seed, &g_source)?;
            (l, Some(obj))
        }
    };
    let mut hyper = Hyperparams { lambda, ..partial };
    if let Some((ge, ls)) = &reference {
        hyper.g = estimate_g(data, ge, ls, &hyper);
    }
    hyper.validate()?;
    Ok(Tuned { hyper, prior, phi, lambda_objective: objective, alasso })
}

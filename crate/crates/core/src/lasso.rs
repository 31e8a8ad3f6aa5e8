//! Pathwise coordinate-descent lasso, the adaptive lasso built on it, and
//! marginal-correlation screening.
//!
//! Objective at level `λ` with per-coordinate weights `w_j` (all ones for the
//! plain lasso):
//!
//! ```text
//! (1 / 2n) ||y - Xβ||² + λ Σ_j w_j |β_j|
//! ```

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::EcapError;
use crate::linalg::{dot, norm_sq, solve, Matrix};
use crate::model::{gram_eigen, least_squares, Configuration};
use crate::scalar::{lit, ln_binomial, Real};

pub const DEFAULT_PATH_LEVELS: usize = 100;
pub const DEFAULT_PATH_RATIO: f64 = 1e-3;
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;
/// A path stops once the residual sum of squares falls below this share of
/// `||y||²`, or the support reaches `n - 1`.
pub const SATURATION_RATIO: f64 = 1e-3;
/// Added to `|β_init|` before inverting into adaptive weights.
pub const ADAPTIVE_WEIGHT_FLOOR: f64 = 1e-6;

/// How a level is picked along a path. Both score the least-squares refit of
/// the level's support by `n ln(RSS/n) + |S| ln n`; the extended form adds
/// `2γ ln C(p, |S|)`.
///
/// Plain BIC badly overfits once `p` is several times `n`: the refit RSS
/// keeps falling as noise columns enter, `σ̂²` lands far below the truth and
/// every downstream model grows. The extended form is the default.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PathCriterion {
    Bic,
    ExtendedBic { gamma: f64 },
}

impl Default for PathCriterion {
    fn default() -> Self {
        PathCriterion::ExtendedBic { gamma: 1.0 }
    }
}

impl PathCriterion {
    fn size_penalty(&self, n: usize, p: usize, s: usize) -> f64 {
        let base = s as f64 * (n as f64).ln();
        match *self {
            PathCriterion::Bic => base,
            PathCriterion::ExtendedBic { gamma } => base + 2.0 * gamma * ln_binomial(p, s),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LassoPath<T> {
    /// Decreasing regularization levels; shorter than the requested grid
    /// when the fit saturated first.
    pub lambdas: Vec<T>,
    pub betas: Vec<Vec<T>>,
    /// Criterion value of the least-squares refit of each level's support.
    pub bic: Vec<T>,
    /// Index of the minimizing level.
    pub selected: usize,
    /// Levels that hit the sweep limit; their solutions are still reported.
    pub unconverged: Vec<EcapError>,
}

impl<T: Real> LassoPath<T> {
    pub fn support(&self, level: usize) -> Configuration {
        support_of(&self.betas[level])
    }

    pub fn selected_beta(&self) -> &[T] {
        &self.betas[self.selected]
    }
}

fn support_of<T: Real>(beta: &[T]) -> Configuration {
    Configuration::from_sorted(beta.iter().enumerate().filter(|(_, b)| **b != T::zero()).map(|(j, _)| j).collect())
}

#[inline]
fn soft_threshold<T: Real>(z: T, t: T) -> T {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        T::zero()
    }
}

/// Smallest level at which the weighted lasso solution is identically zero.
pub fn lambda_max<T: Real>(data: &Dataset<T>, weights: Option<&[T]>) -> T {
    let n: T = lit(data.n() as f64);
    (0..data.p())
        .map(|j| dot(data.column(j), data.y()).abs() / n / weights.map_or(T::one(), |w| w[j]))
        .fold(T::zero(), T::max)
}

/// `levels` log-spaced values from `lambda_max` down to `ratio * lambda_max`.
pub fn log_grid<T: Real>(lambda_max: T, levels: usize, ratio: T) -> Vec<T> {
    if levels == 1 {
        return vec![lambda_max];
    }
    let lo = ratio.ln();
    (0..levels)
        .map(|k| lambda_max * (lo * lit::<T>(k as f64 / (levels - 1) as f64)).exp())
        .collect()
}

/// Coordinate-descent state for one design and weight vector, reused across
/// path levels as a warm start.
pub struct CoordinateDescent<'a, T> {
    data: &'a Dataset<T>,
    weights: Vec<T>,
    col_sq: Vec<T>,
    beta: Vec<T>,
    residual: Vec<T>,
    tol: T,
}

impl<'a, T: Real> CoordinateDescent<'a, T> {
    pub fn new(data: &'a Dataset<T>, weights: Option<&[T]>) -> Self {
        let n: T = lit(data.n() as f64);
        let weights = weights.map_or_else(|| vec![T::one(); data.p()], <[T]>::to_vec);
        CoordinateDescent {
            data,
            weights,
            col_sq: (0..data.p()).map(|j| norm_sq(data.column(j)) / n).collect(),
            beta: vec![T::zero(); data.p()],
            residual: data.y().to_vec(),
            tol: lit(1e-10),
        }
    }

    pub fn beta(&self) -> &[T] {
        &self.beta
    }

    /// `||r||² / ||y||²` at the current coefficients.
    pub fn residual_ratio(&self) -> T {
        norm_sq(&self.residual) / self.data.y_norm_sq()
    }

    /// `(1/2n)||r||² + λ Σ w_j |β_j|`.
    pub fn objective(&self, level: T) -> T {
        let n: T = lit(self.data.n() as f64);
        let l1: T = self.beta.iter().zip(&self.weights).map(|(&b, &w)| w * b.abs()).sum();
        norm_sq(&self.residual) / (lit::<T>(2.0) * n) + level * l1
    }

    /// One full cyclic pass; returns the largest scaled coefficient change.
    pub fn sweep(&mut self, level: T) -> T {
        let mut max_change = T::zero();
        for j in 0..self.beta.len() {
            max_change = max_change.max(self.update(j, level));
        }
        max_change
    }

    /// A pass over the currently nonzero coefficients only.
    fn sweep_active(&mut self, level: T, active: &[usize]) -> T {
        let mut max_change = T::zero();
        for &j in active {
            max_change = max_change.max(self.update(j, level));
        }
        max_change
    }

    fn update(&mut self, j: usize, level: T) -> T {
        if self.col_sq[j] == T::zero() {
            return T::zero();
        }
        let n: T = lit(self.data.n() as f64);
        let col = self.data.column(j);
        let old = self.beta[j];
        let z = dot(col, &self.residual) / n + self.col_sq[j] * old;
        let new = soft_threshold(z, level * self.weights[j]) / self.col_sq[j];
        if new == old {
            return T::zero();
        }
        let delta = new - old;
        for (r, &x) in self.residual.iter_mut().zip(col) {
            *r = *r - x * delta;
        }
        self.beta[j] = new;
        delta.abs() * self.col_sq[j].sqrt()
    }

    /// Largest violation of the optimality conditions at `level`.
    pub fn kkt_violation(&self, level: T) -> T {
        let n: T = lit(self.data.n() as f64);
        let mut worst = T::zero();
        for j in 0..self.beta.len() {
            let grad = dot(self.data.column(j), &self.residual) / n;
            let bound = level * self.weights[j];
            let v = if self.beta[j] == T::zero() {
                (grad.abs() - bound).max(T::zero())
            } else {
                (grad - bound * self.beta[j].signum()).abs()
            };
            worst = worst.max(v);
        }
        worst
    }

    /// Solves the stationarity equations on the current support and signs
    /// directly. Kept only when the signs survive and the full audit passes;
    /// this finishes levels where the active Gram matrix is badly conditioned
    /// and cyclic updates crawl.
    fn polish(&mut self, level: T, kkt_tol: T) -> bool {
        let active: Vec<usize> = (0..self.beta.len()).filter(|&j| self.beta[j] != T::zero()).collect();
        if active.is_empty() || active.len() >= self.data.n() {
            return false;
        }
        let n: T = lit(self.data.n() as f64);
        let k = active.len();
        let gram = Matrix::from_fn(k, k, |a, b| dot(self.data.column(active[a]), self.data.column(active[b])) / n);
        let rhs: Vec<T> = active
            .iter()
            .map(|&j| dot(self.data.column(j), self.data.y()) / n - level * self.weights[j] * self.beta[j].signum())
            .collect();
        let Some(sol) = solve(&gram, &rhs) else { return false };
        if active.iter().zip(&sol).any(|(&j, &b)| b == T::zero() || b.signum() != self.beta[j].signum() || !b.is_finite()) {
            return false;
        }
        let saved = (self.beta.clone(), self.residual.clone());
        for (&j, &b) in active.iter().zip(&sol) {
            self.beta[j] = b;
        }
        self.residual = self.data.y().to_vec();
        for &j in &active {
            let b = self.beta[j];
            for (r, &x) in self.residual.iter_mut().zip(self.data.column(j)) {
                *r = *r - x * b;
            }
        }
        if self.kkt_violation(level) < kkt_tol {
            return true;
        }
        (self.beta, self.residual) = saved;
        false
    }

    /// Alternates full passes with passes over the active set until the
    /// coefficients settle and the KKT audit passes. `max_sweeps` bounds the
    /// total number of passes of either kind.
    pub fn solve(&mut self, level: T, max_sweeps: usize) -> bool {
        let kkt_tol: T = lit(1e-9);
        let mut passes = 0;
        while passes < max_sweeps {
            let change = self.sweep(level);
            passes += 1;
            if change < self.tol && self.kkt_violation(level) < kkt_tol {
                return true;
            }
            if change < lit(1e-6) && self.polish(level, kkt_tol) {
                return true;
            }
            let active: Vec<usize> = (0..self.beta.len()).filter(|&j| self.beta[j] != T::zero()).collect();
            while passes < max_sweeps {
                passes += 1;
                let change = self.sweep_active(level, &active);
                if change < self.tol {
                    break;
                }
                if passes % 100 == 0 && change < lit(1e-6) && self.polish(level, kkt_tol) {
                    return true;
                }
            }
        }
        false
    }
}

fn refit_bic<T: Real>(data: &Dataset<T>, support: &Configuration, criterion: PathCriterion) -> T {
    let n = data.n();
    let nt: T = lit(n as f64);
    let rss = if support.is_empty() {
        data.y_norm_sq()
    } else if support.size() + 1 >= n {
        return T::infinity();
    } else {
        match gram_eigen(data, support) {
            Ok(ge) => least_squares(data, support, &ge).rss,
            Err(_) => return T::infinity(),
        }
    };
    let rss = rss.max(T::min_positive_value());
    nt * (rss / nt).ln() + lit::<T>(criterion.size_penalty(n, data.p(), support.size()))
}

fn path_with_weights<T: Real>(
    data: &Dataset<T>,
    weights: Option<&[T]>,
    grid: &[T],
    max_sweeps: usize,
    criterion: PathCriterion,
) -> LassoPath<T> {
    let mut cd = CoordinateDescent::new(data, weights);
    let mut betas = Vec::with_capacity(grid.len());
    let mut bic = Vec::with_capacity(grid.len());
    let mut unconverged = Vec::new();
    let mut bic_cache: HashMap<Configuration, T> = HashMap::new();
    for (level_idx, &level) in grid.iter().enumerate() {
        let converged = cd.solve(level, max_sweeps);
        let beta = cd.beta().to_vec();
        let support = support_of(&beta);
        // the fit has interpolated: later levels add nothing a refit could use
        let saturated = support.size() + 1 >= data.n() || cd.residual_ratio() < lit(SATURATION_RATIO);
        if !converged {
            if saturated && !betas.is_empty() {
                break;
            }
            unconverged.push(EcapError::NoConvergence { level: level_idx });
        }
        let b = *bic_cache.entry(support.clone()).or_insert_with(|| refit_bic(data, &support, criterion));
        betas.push(beta);
        bic.push(b);
        if saturated {
            break;
        }
    }
    let grid = &grid[..betas.len()];
    // first minimum wins, i.e. the sparsest among ties
    let mut selected = 0;
    for (k, &b) in bic.iter().enumerate() {
        if b < bic[selected] {
            selected = k;
        }
    }
    LassoPath { lambdas: grid.to_vec(), betas, bic, selected, unconverged }
}

/// Lasso solutions along `grid` (decreasing), warm-started level to level.
pub fn lasso_fit<T: Real>(data: &Dataset<T>, grid: &[T], criterion: PathCriterion) -> LassoPath<T> {
    path_with_weights(data, None, grid, DEFAULT_MAX_SWEEPS, criterion)
}

/// Lasso over the default 100-level grid.
pub fn lasso_default<T: Real>(data: &Dataset<T>, criterion: PathCriterion) -> LassoPath<T> {
    let grid = log_grid(lambda_max(data, None), DEFAULT_PATH_LEVELS, lit(DEFAULT_PATH_RATIO));
    lasso_fit(data, &grid, criterion)
}

#[derive(Clone, Debug)]
pub struct AdaptiveLassoFit<T> {
    pub support: Configuration,
    /// Least-squares refit on `support`.
    pub beta: Vec<T>,
    pub sigma2: T,
    /// True when nothing was selected and the null fallback was used.
    pub empty: bool,
    pub path: LassoPath<T>,
}

/// Two-stage adaptive lasso: a tuned lasso supplies weights
/// `1 / (|β_init| + 1e-6)`, a weighted lasso path is tuned by the same
/// criterion, and the chosen support is refit by least squares.
pub fn adaptive_lasso<T: Real>(data: &Dataset<T>, criterion: PathCriterion) -> AdaptiveLassoFit<T> {
    let init = lasso_default(data, criterion);
    let floor: T = lit(ADAPTIVE_WEIGHT_FLOOR);
    let weights: Vec<T> = init.selected_beta().iter().map(|b| T::one() / (b.abs() + floor)).collect();
    let grid = log_grid(lambda_max(data, Some(&weights)), DEFAULT_PATH_LEVELS, lit(DEFAULT_PATH_RATIO));
    let path = path_with_weights(data, Some(&weights), &grid, DEFAULT_MAX_SWEEPS, criterion);
    let support = path.support(path.selected);
    let n = data.n();
    if support.is_empty() {
        return AdaptiveLassoFit {
            support,
            beta: Vec::new(),
            sigma2: data.y_norm_sq() / lit((n - 1) as f64),
            empty: true,
            path,
        };
    }
    // a finite criterion guarantees the refit exists and n > |S| + 1
    let ge = gram_eigen(data, &support).expect("selected support has a nonsingular Gram matrix");
    let ls = least_squares(data, &support, &ge);
    let sigma2 = ls.rss / lit((n - support.size()) as f64);
    AdaptiveLassoFit { support, beta: ls.beta_hat, sigma2, empty: false, path }
}

/// The `k` predictors with the largest `|corr(x_j, y)|`, ties to the lower
/// index, returned in ascending index order.
pub fn screen_marginal<T: Real>(data: &Dataset<T>, k: usize) -> Configuration {
    let scores: Vec<T> = (0..data.p())
        .map(|j| {
            let c = data.column(j);
            let norm = norm_sq(c).sqrt();
            if norm > T::zero() {
                (dot(c, data.y()) / norm).abs()
            } else {
                T::zero()
            }
        })
        .collect();
    let ranked = rank_descending(&scores);
    let mut keep: Vec<usize> = ranked.into_iter().take(k.min(data.p())).collect();
    keep.sort_unstable();
    Configuration::from_sorted(keep)
}

/// Indices ordered by decreasing score, ties broken by ascending index.
pub(crate) fn rank_descending<T: Real>(scores: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    idx
}

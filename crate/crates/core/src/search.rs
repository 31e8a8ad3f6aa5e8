//! Shotgun stochastic search with residual screening over the configuration
//! posterior.
//!
//! Each step scores the add / swap / delete neighborhoods of the current
//! configuration (additions restricted to the `K` inactive predictors most
//! correlated with the current residual), draws one member from each
//! neighborhood proportionally to its posterior, then moves to one of the
//! three draws proportionally to the neighborhoods' total posterior mass.
//! Every scored configuration is kept in the [`VisitedLedger`].

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{EcapError, Result};
use crate::lasso::rank_descending;
use crate::linalg::dot;
use crate::marginal::{score, GMode, Hyperparams, ScoredModel, Scorer};
use crate::model::{gram_eigen, least_squares, Configuration};
use crate::prior::{log_det_weight, PriorConfig};
use crate::rng::{stream, Stream};
use crate::scalar::{ln_binomial, log_sum_exp, to_f64, Real};

pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_RESTARTS: usize = 3;
pub const DEFAULT_SCREEN_K: usize = 50;
pub const MAX_ENUMERATION_P: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSettings {
    pub iterations: usize,
    pub restarts: usize,
    pub screen_k: usize,
    pub seed: u64,
    pub g_mode: GMode,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings {
            iterations: DEFAULT_ITERATIONS,
            restarts: DEFAULT_RESTARTS,
            screen_k: DEFAULT_SCREEN_K,
            seed: 0,
            g_mode: GMode::PerModel,
        }
    }
}

impl SearchSettings {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.screen_k == 0 || self.restarts == 0 {
            return Err(EcapError::InvalidArgument("iterations, restarts and screen_k must all be >= 1".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// neighborhoods

/// Lazy description of the add / swap / delete neighborhoods of `base`.
#[derive(Clone, Copy, Debug)]
pub struct Neighborhood<'a> {
    base: &'a Configuration,
    p: usize,
}

pub fn neighborhood(s: &Configuration, p: usize) -> Neighborhood<'_> {
    Neighborhood { base: s, p }
}

impl<'a> Neighborhood<'a> {
    /// `(|S+|, |S0|, |S-|) = (p - s, s (p - s), s)`.
    pub fn sizes(&self) -> (usize, usize, usize) {
        let s = self.base.size();
        (self.p - s, s * (self.p - s), s)
    }

    fn outside(&self) -> impl Iterator<Item = usize> + 'a {
        let base = self.base;
        (0..self.p).filter(move |&j| !base.contains(j))
    }

    pub fn additions(&self) -> impl Iterator<Item = Configuration> + 'a {
        let base = self.base;
        self.outside().map(move |j| base.with_added(j))
    }

    pub fn swaps(&self) -> impl Iterator<Item = Configuration> + 'a {
        let base = self.base;
        let outside: Vec<usize> = self.outside().collect();
        base.indices().iter().flat_map(move |&i| {
            let outside = outside.clone();
            outside.into_iter().map(move |j| base.with_swapped(i, j))
        })
    }

    pub fn deletions(&self) -> impl Iterator<Item = Configuration> + 'a {
        let base = self.base;
        base.indices().iter().map(move |&i| base.with_removed(i))
    }
}

/// The `k` predictors outside `s` with the largest `|x_j^T r|`, ties to the
/// lower index, in rank order.
pub fn screened_candidates<T: Real>(data: &Dataset<T>, s: &Configuration, residual: &[T], k: usize) -> Vec<usize> {
    let outside: Vec<usize> = (0..data.p()).filter(|&j| !s.contains(j)).collect();
    let scores: Vec<T> = outside.iter().map(|&j| dot(data.column(j), residual).abs()).collect();
    rank_descending(&scores).into_iter().take(k).map(|r| outside[r]).collect()
}

fn residual_of<T: Real>(data: &Dataset<T>, s: &Configuration) -> Vec<T> {
    if s.is_empty() {
        return data.y().to_vec();
    }
    match gram_eigen(data, s) {
        Ok(ge) => least_squares(data, s, &ge).residual(data.y()),
        Err(_) => data.y().to_vec(),
    }
}

// ---------------------------------------------------------------------------
// ledger

#[derive(Clone, Debug, Default)]
pub struct VisitedLedger<T> {
    pub models: BTreeMap<Configuration, ScoredModel<T>>,
    /// Configuration with the highest log score; ties go to the smaller key.
    pub best: Option<Configuration>,
    /// Accepted states of each chain, starting with its initial state.
    pub histories: Vec<Vec<Configuration>>,
}

impl<T: Real> VisitedLedger<T> {
    pub fn new() -> Self {
        VisitedLedger { models: BTreeMap::new(), best: None, histories: Vec::new() }
    }

    pub fn best_model(&self) -> Option<&ScoredModel<T>> {
        self.best.as_ref().and_then(|b| self.models.get(b))
    }

    pub fn best_score(&self) -> T {
        self.best_model().map_or(T::neg_infinity(), |m| m.log_score)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn record(&mut self, m: ScoredModel<T>) {
        if self.models.contains_key(&m.config) {
            return;
        }
        let better = match self.best_model() {
            None => true,
            Some(b) => m.log_score > b.log_score || (m.log_score == b.log_score && m.config < b.config),
        };
        if better {
            self.best = Some(m.config.clone());
        }
        self.models.insert(m.config.clone(), m);
    }

    /// Union of two ledgers; the result does not depend on merge order.
    pub fn merge(&mut self, other: VisitedLedger<T>) {
        for (_, m) in other.models {
            self.record(m);
        }
        self.histories.extend(other.histories);
    }

    /// Finite-scored models, highest first (ties by configuration).
    pub fn top(&self, m: usize) -> Vec<&ScoredModel<T>> {
        let mut v: Vec<&ScoredModel<T>> = self.models.values().filter(|x| x.is_finite()).collect();
        v.sort_by(|a, b| b.log_score.partial_cmp(&a.log_score).unwrap().then_with(|| a.config.cmp(&b.config)));
        v.truncate(m);
        v
    }

    /// Posterior mass of each visited model, renormalized over the ledger.
    pub fn normalized_mass(&self) -> Result<Vec<(&Configuration, f64)>> {
        let scores: Vec<f64> = self.models.values().map(|m| to_f64(m.log_score)).collect();
        let lse = log_sum_exp(scores.iter().copied());
        if !lse.is_finite() {
            return Err(EcapError::AllFiltered);
        }
        Ok(self.models.keys().zip(scores).map(|(k, s)| (k, (s - lse).exp())).collect())
    }

    /// Marginal inclusion probability of every predictor `0..p`.
    pub fn inclusion_probabilities(&self, p: usize) -> Result<Vec<f64>> {
        let mut probs = vec![0.0; p];
        for (config, mass) in self.normalized_mass()? {
            for &j in config.indices() {
                probs[j] += mass;
            }
        }
        Ok(probs)
    }
}

/// Predictors whose inclusion probability is at least one half.
pub fn median_probability_model<T: Real>(ledger: &VisitedLedger<T>, p: usize) -> Result<Configuration> {
    let probs = ledger.inclusion_probabilities(p)?;
    Ok(mpm_from_inclusion(&probs))
}

pub fn mpm_from_inclusion(probs: &[f64]) -> Configuration {
    // rounding slack so an exact 1/2 split is not lost to the last ulp
    Configuration::from_sorted(probs.iter().enumerate().filter(|(_, &q)| q >= 0.5 - 1e-12).map(|(j, _)| j).collect())
}

// ---------------------------------------------------------------------------
// sampler

#[derive(Clone, Debug)]
pub struct ChainState<T> {
    pub current: ScoredModel<T>,
    residual: Vec<T>,
}

impl<T: Real> ChainState<T> {
    pub fn start(scorer: &Scorer<'_, T>, s: Configuration) -> Self {
        let current = scorer.score(&s);
        let residual = residual_of(scorer.data(), &s);
        ChainState { current, residual }
    }
}

/// Index drawn with probability proportional to `exp(log_w)`; `None` when
/// every weight is zero.
pub fn sample_log_weights<R: Rng + ?Sized>(log_w: &[f64], rng: &mut R) -> Option<(usize, f64)> {
    let lse = log_sum_exp(log_w.iter().copied());
    if !lse.is_finite() {
        return None;
    }
    let u: f64 = rng.random::<f64>();
    let mut acc = 0.0;
    let mut last = None;
    for (k, &w) in log_w.iter().enumerate() {
        if w == f64::NEG_INFINITY {
            continue;
        }
        acc += (w - lse).exp();
        last = Some(k);
        if u < acc {
            return Some((k, lse));
        }
    }
    last.map(|k| (k, lse))
}

/// One search iteration. Scores the screened neighborhoods of the current
/// state, records them, and moves.
pub fn sss_step<T: Real, R: Rng + ?Sized>(
    state: ChainState<T>,
    scorer: &Scorer<'_, T>,
    screen_k: usize,
    rng: &mut R,
    ledger: &mut VisitedLedger<T>,
) -> ChainState<T> {
    let data = scorer.data();
    let s = &state.current.config;
    let cand = screened_candidates(data, s, &state.residual, screen_k);
    let plus: Vec<Configuration> = cand.iter().map(|&j| s.with_added(j)).collect();
    let zero: Vec<Configuration> = s.indices().iter().flat_map(|&i| cand.iter().map(move |&j| s.with_swapped(i, j))).collect();
    let minus: Vec<Configuration> = neighborhood(s, data.p()).deletions().collect();

    let mut picks = Vec::with_capacity(3);
    let mut masses = Vec::with_capacity(3);
    for set in [plus, zero, minus] {
        let scored: Vec<ScoredModel<T>> = set.par_iter().map(|c| scorer.score(c)).collect();
        let log_w: Vec<f64> = scored.iter().map(|m| to_f64(m.log_score)).collect();
        if let Some((k, lse)) = sample_log_weights(&log_w, rng) {
            picks.push(scored[k].clone());
            masses.push(lse);
        }
        for m in scored {
            ledger.record(m);
        }
    }
    match sample_log_weights(&masses, rng) {
        Some((k, _)) => {
            let next = picks.swap_remove(k);
            let residual = residual_of(data, &next.config);
            ChainState { current: next, residual }
        }
        None => state,
    }
}

fn run_chain<T: Real>(scorer: &Scorer<'_, T>, settings: &SearchSettings, chain: usize, initial: Option<&Configuration>) -> VisitedLedger<T> {
    let mut rng = stream(settings.seed, Stream::Chain, chain as u64);
    let p = scorer.data().p();
    let start = match initial {
        Some(s) if chain == 0 => s.clone(),
        _ => Configuration::from_sorted(vec![rng.random_range(0..p)]),
    };
    let mut ledger = VisitedLedger::new();
    let mut state = ChainState::start(scorer, start);
    ledger.record(state.current.clone());
    let mut history = Vec::with_capacity(settings.iterations + 1);
    history.push(state.current.config.clone());
    for _ in 0..settings.iterations {
        state = sss_step(state, scorer, settings.screen_k, &mut rng, &mut ledger);
        history.push(state.current.config.clone());
    }
    ledger.histories.push(history);
    ledger
}

/// Runs `restarts` chains of `iterations` steps and merges their ledgers.
/// Chain 0 starts at `initial` when given; the others start at a random
/// single predictor.
pub fn run_search_with<T: Real>(scorer: &Scorer<'_, T>, settings: &SearchSettings, initial: Option<&Configuration>) -> Result<VisitedLedger<T>> {
    settings.validate()?;
    let ledgers: Vec<VisitedLedger<T>> = (0..settings.restarts).into_par_iter().map(|c| run_chain(scorer, settings, c, initial)).collect();
    let mut merged = VisitedLedger::new();
    for l in ledgers {
        merged.merge(l);
    }
    Ok(merged)
}

pub fn run_search<T: Real>(
    data: &Dataset<T>,
    h: &Hyperparams<T>,
    pc: &PriorConfig<T>,
    settings: &SearchSettings,
    initial: Option<&Configuration>,
) -> Result<VisitedLedger<T>> {
    let scorer = Scorer::new(data, *h, pc.clone(), settings.g_mode);
    run_search_with(&scorer, settings, initial)
}

// ---------------------------------------------------------------------------
// exhaustive oracle

#[derive(Clone, Debug)]
pub struct ExactPosterior<T> {
    /// Every configuration with `|S| <= R`, including the empty one.
    pub models: Vec<ScoredModel<T>>,
    /// Normalized posterior probability of each model.
    pub probs: Vec<f64>,
    pub inclusion: Vec<f64>,
    /// Per size `s = 1..=R`: `log Σ_{|S|=s} D(S)^{-λ/2s}` over unfiltered
    /// models, alongside `log C(p, s)` it is approximated by.
    pub log_denominators: Vec<(usize, f64, f64)>,
}

impl<T: Real> ExactPosterior<T> {
    pub fn argmax(&self) -> &ScoredModel<T> {
        let mut best = &self.models[0];
        for m in &self.models {
            if m.log_score > best.log_score || (m.log_score == best.log_score && m.config < best.config) {
                best = m;
            }
        }
        best
    }

    pub fn median_probability_model(&self) -> Configuration {
        mpm_from_inclusion(&self.inclusion)
    }

    pub fn as_ledger(&self) -> VisitedLedger<T> {
        let mut l = VisitedLedger::new();
        for m in &self.models {
            l.record(m.clone());
        }
        l
    }
}

/// Scores every configuration of a small problem and normalizes.
pub fn enumerate_exact<T: Real>(data: &Dataset<T>, h: &Hyperparams<T>, pc: &PriorConfig<T>, g_mode: GMode) -> Result<ExactPosterior<T>> {
    let p = data.p();
    if p > MAX_ENUMERATION_P {
        return Err(EcapError::TooLarge(p));
    }
    let configs: Vec<Configuration> = (0u32..(1u32 << p))
        .map(|mask| Configuration::from_sorted((0..p).filter(|&j| mask & (1 << j) != 0).collect()))
        .filter(|c| c.size() <= pc.rank_cap)
        .collect();
    let models: Vec<ScoredModel<T>> = configs.par_iter().map(|c| score(data, c, h, pc, g_mode)).collect();
    let scores: Vec<f64> = models.iter().map(|m| to_f64(m.log_score)).collect();
    let lse = log_sum_exp(scores.iter().copied());
    if !lse.is_finite() {
        return Err(EcapError::AllFiltered);
    }
    let probs: Vec<f64> = scores.iter().map(|s| (s - lse).exp()).collect();
    let mut inclusion = vec![0.0; p];
    for (m, &q) in models.iter().zip(&probs) {
        for &j in m.config.indices() {
            inclusion[j] += q;
        }
    }
    let mut per_size: Vec<Vec<f64>> = vec![Vec::new(); pc.rank_cap + 1];
    for c in configs.iter().filter(|c| !c.is_empty()) {
        if let Ok(ge) = gram_eigen(data, c) {
            if ge.kappa <= pc.kappa_max {
                per_size[c.size()].push(to_f64(log_det_weight(&ge, h.lambda)));
            }
        }
    }
    let log_denominators = (1..=pc.rank_cap).map(|s| (s, log_sum_exp(per_size[s].iter().copied()), ln_binomial(p, s))).collect();
    Ok(ExactPosterior { models, probs, inclusion, log_denominators })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::standardize;
    use crate::linalg::Matrix;
    use crate::prior::DEFAULT_KAPPA_MAX;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn cfg(v: &[usize]) -> Configuration {
        Configuration::from_sorted(v.to_vec())
    }

    fn scored(c: &[usize], s: f64) -> ScoredModel<f64> {
        ScoredModel { config: cfg(c), log_marginal: s, log_prior: 0.0, log_score: s, g: 1.0, terms: None, filtered: None }
    }

    #[test]
    fn neighborhood_sizes() {
        let s = cfg(&[1, 2]);
        let nb = neighborhood(&s, 5);
        assert_eq!(nb.sizes(), (3, 6, 2));
        assert_eq!(nb.additions().count(), 3);
        assert_eq!(nb.swaps().count(), 6);
        let dels: Vec<Configuration> = nb.deletions().collect();
        assert_eq!(dels.len(), 2);
        assert!(dels.iter().all(|d| d.size() == 1 && s.is_superset_of(d)));
        let e = Configuration::empty();
        let nb = neighborhood(&e, 5);
        assert_eq!(nb.sizes(), (5, 0, 0));
        assert_eq!(nb.swaps().count(), 0);
    }

    #[test]
    fn screening_ranks_dominant_signal_first() {
        // orthogonal design
        let x = Matrix::from_col_major(4, 3, vec![1.0, 1.0, -1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, -1.0, 1.0]);
        let y = vec![0.5 + 3.0, 0.5 - 3.0, -0.5 + 3.0, -0.5 - 3.0]; // 0.5 x0 + 3 x1
        let data = Dataset::from_parts(y.clone(), x).unwrap();
        assert_eq!(screened_candidates(&data, &Configuration::empty(), &y, 3), vec![1, 0, 2]);
        // saturation: K >= p - s keeps everything outside S
        assert_eq!(screened_candidates(&data, &cfg(&[1]), &y, 10).len(), 2);
        // zero residual: tie-break by index
        assert_eq!(screened_candidates(&data, &cfg(&[0]), &[0.0; 4], 2), vec![1, 2]);
    }

    #[test]
    fn ledger_best_and_mpm() {
        let mut l = VisitedLedger::new();
        l.record(scored(&[1], 0.0));
        l.record(scored(&[2], 0.0));
        assert_eq!(median_probability_model(&l, 4).unwrap().indices(), &[1, 2]);
        assert_eq!(l.best.as_ref().unwrap().indices(), &[1]);
        let probs = l.inclusion_probabilities(4).unwrap();
        assert!((probs[1] - 0.5).abs() < 1e-15 && (probs[2] - 0.5).abs() < 1e-15);

        let mut single = VisitedLedger::new();
        single.record(scored(&[0, 3], -5.0));
        let mut f = scored(&[1], 0.0);
        f.log_score = f64::NEG_INFINITY;
        f.filtered = Some(crate::marginal::FilterReason::SizeCap);
        single.record(f.clone());
        assert_eq!(median_probability_model(&single, 4).unwrap().indices(), &[0, 3]);

        let mut none = VisitedLedger::<f64>::new();
        none.record(f);
        assert_eq!(median_probability_model(&none, 4).unwrap_err(), EcapError::AllFiltered);
    }

    #[test]
    fn sampling_skips_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let (k, _) = sample_log_weights(&[f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY], &mut rng).unwrap();
            assert_eq!(k, 1);
        }
        assert!(sample_log_weights(&[f64::NEG_INFINITY], &mut rng).is_none());
        assert!(sample_log_weights(&[], &mut rng).is_none());
    }

    #[test]
    fn categorical_frequencies_match_weights() {
        // log scores {0, log 3} -> probabilities (0.25, 0.75)
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let w = [0.0, 3f64.ln()];
        let draws = 10_000;
        let hits = (0..draws).filter(|_| sample_log_weights(&w, &mut rng).unwrap().0 == 1).count() as f64;
        let se = (0.75f64 * 0.25 / draws as f64).sqrt();
        assert!((hits / draws as f64 - 0.75).abs() < 3.0 * se);
    }

    fn toy(seed: u64) -> (Dataset<f64>, Hyperparams<f64>, PriorConfig<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Matrix::from_fn(40, 8, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y: Vec<f64> = (0..40).map(|i| 5.0 * x[(i, 1)] + 5.0 * x[(i, 4)] + rng.sample::<f64, _>(StandardNormal)).collect();
        let data = standardize(&y, &x).unwrap();
        let h = Hyperparams::new(0.0, 40.0, 0.0, 0.999, 1.0).unwrap();
        let pc = PriorConfig::new(0.05, 1.0, 8, 8, DEFAULT_KAPPA_MAX).unwrap();
        (data, h, pc)
    }

    #[test]
    fn exact_posterior_normalizes_and_finds_truth() {
        let (data, h, pc) = toy(3);
        let exact = enumerate_exact(&data, &h, &pc, GMode::PerModel).unwrap();
        assert_eq!(exact.models.len(), 256);
        assert!((exact.probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert_eq!(exact.argmax().config.indices(), &[1, 4]);
        let ledger_mpm = median_probability_model(&exact.as_ledger(), 8).unwrap();
        assert_eq!(exact.median_probability_model(), ledger_mpm);
        let total: f64 = exact.inclusion.iter().sum();
        let expected: f64 = exact.models.iter().zip(&exact.probs).map(|(m, q)| q * m.config.size() as f64).sum();
        assert!((total - expected).abs() < 1e-10);
    }

    #[test]
    fn enumeration_rejects_large_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Matrix::from_fn(30, 21, |_, _| rng.sample::<f64, _>(StandardNormal));
        let data = Dataset::from_parts(vec![0.0; 30], x).unwrap();
        let h = Hyperparams::new(0.0, 1.0, 0.0, 0.999, 1.0).unwrap();
        let pc = PriorConfig::new(0.05, 1.0, 21, 5, DEFAULT_KAPPA_MAX).unwrap();
        assert_eq!(enumerate_exact(&data, &h, &pc, GMode::Global).unwrap_err(), EcapError::TooLarge(21));
    }

    #[test]
    fn search_is_deterministic_and_monotone() {
        let (data, h, pc) = toy(5);
        let settings = SearchSettings { iterations: 50, restarts: 2, screen_k: 8, seed: 11, g_mode: GMode::PerModel };
        let a = run_search(&data, &h, &pc, &settings, None).unwrap();
        let b = run_search(&data, &h, &pc, &settings, None).unwrap();
        assert_eq!(a.models.keys().collect::<Vec<_>>(), b.models.keys().collect::<Vec<_>>());
        assert_eq!(a.histories, b.histories);
        assert!(a.histories.iter().all(|hst| hst.len() == 51));
        let longer = run_search(&data, &h, &pc, &SearchSettings { iterations: 100, ..settings.clone() }, None).unwrap();
        assert!(longer.best_score() >= a.best_score());
        let max = a.models.values().map(|m| m.log_score).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(a.best_score(), max);
    }

    #[test]
    fn ledger_best_never_decreases_during_a_chain() {
        let (data, h, pc) = toy(8);
        let scorer = Scorer::new(&data, h, pc, GMode::PerModel);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut ledger = VisitedLedger::new();
        let mut state = ChainState::start(&scorer, cfg(&[0]));
        ledger.record(state.current.clone());
        let mut prev = ledger.best_score();
        for _ in 0..30 {
            state = sss_step(state, &scorer, 8, &mut rng, &mut ledger);
            assert!(ledger.best_score() >= prev);
            prev = ledger.best_score();
        }
    }
}

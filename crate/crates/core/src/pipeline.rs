//! Tune, search, and summarize in one call.

use crate::data::Dataset;
use crate::error::Result;
use crate::inference::{posterior_for, CoefficientPosterior};
use crate::marginal::{ScoredModel, Scorer};
use crate::model::Configuration;
use crate::search::{median_probability_model, run_search_with, SearchSettings, VisitedLedger};
use crate::tuning::{tune, Tuned, TuningSettings};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct Selection<T> {
    pub tuned: Tuned<T>,
    pub ledger: VisitedLedger<T>,
    pub inclusion: Vec<f64>,
    pub mpm: Configuration,
    pub map: ScoredModel<T>,
    /// Coefficient posterior of the MPM; `None` when the MPM is empty.
    pub posterior: Option<CoefficientPosterior<T>>,
}

/// Runs the full procedure with tuning and search both seeded from `seed`.
/// The first chain starts at the adaptive-lasso model.
pub fn select<T: Real>(data: &Dataset<T>, tuning: &TuningSettings, search: &SearchSettings, seed: u64) -> Result<Selection<T>> {
    let tuned = tune(data, tuning, seed)?;
    let settings = SearchSettings { seed, ..search.clone() };
    let scorer = Scorer::new(data, tuned.hyper, tuned.prior.clone(), settings.g_mode);
    let ledger = run_search_with(&scorer, &settings, Some(&tuned.alasso.support))?;
    let inclusion = ledger.inclusion_probabilities(data.p())?;
    let mpm = median_probability_model(&ledger, data.p())?;
    let map = ledger.best_model().cloned().expect("non-empty ledger has a best model");
    let posterior = if mpm.is_empty() {
        None
    } else {
        // posterior at the g the scorer used for this model
        let g = scorer.score(&mpm).g;
        let h = crate::marginal::Hyperparams { g, ..tuned.hyper };
        Some(posterior_for(data, &mpm, &h)?)
    };
    Ok(Selection { tuned, ledger, inclusion, mpm, map, posterior })
}

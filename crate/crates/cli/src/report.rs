//! Result documents. Field order here is the key order on disk.

use ecap::search::VisitedLedger;
use ecap::tuning::LambdaObjective;
use ecap::{CoefficientPosterior, Configuration, Hyperparams, Matrix, ScoredModel, Standardization};
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize)]
pub struct HyperReport {
    pub lambda: f64,
    pub lambda_source: &'static str,
    pub g: f64,
    pub g_mode: ecap::GMode,
    pub phi: f64,
    pub phi_hat: f64,
    pub sigma2: f64,
    pub alpha: f64,
    pub a: f64,
    pub c: f64,
    pub kappa_max: f64,
    pub rank_cap: usize,
}

#[derive(Debug, Serialize)]
pub struct CurveReport {
    pub lambda: Vec<f64>,
    pub log_objective: Vec<f64>,
    pub g: Vec<f64>,
    pub importance_samples: usize,
}

impl From<&LambdaObjective<f64>> for CurveReport {
    fn from(o: &LambdaObjective<f64>) -> Self {
        CurveReport { lambda: o.grid.clone(), log_objective: o.values.clone(), g: o.g.clone(), importance_samples: o.n_samples }
    }
}

#[derive(Debug, Serialize)]
pub struct ModelReport {
    pub config: Vec<usize>,
    pub log_score: f64,
    pub log_marginal: f64,
    pub log_prior: f64,
    pub g: f64,
    /// Share of the visited (or enumerated) posterior mass.
    pub mass: f64,
}

impl ModelReport {
    pub fn new(m: &ScoredModel<f64>, mass: f64, map: &dyn Fn(&Configuration) -> Vec<usize>) -> Self {
        ModelReport { config: map(&m.config), log_score: m.log_score, log_marginal: m.log_marginal, log_prior: m.log_prior, g: m.g, mass }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PosteriorReport {
    pub config: Vec<usize>,
    /// Standardized scale.
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    /// Original scale, with the intercept implied by the centering.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl PosteriorReport {
    pub fn new(post: &CoefficientPosterior<f64>, config: Vec<usize>, scaling: &Standardization<f64>) -> Self {
        let k = post.mean.len();
        let cov: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| post.cov[(i, j)]).collect()).collect();
        let coefficients: Vec<f64> = config.iter().zip(&post.mean).map(|(&j, &b)| b / scaling.x_scale[j]).collect();
        let intercept = scaling.y_mean - config.iter().zip(&coefficients).map(|(&j, &b)| b * scaling.x_mean[j]).sum::<f64>();
        PosteriorReport {
            sd: (0..k).map(|i| cov[i][i].sqrt()).collect(),
            config,
            mean: post.mean.clone(),
            cov,
            coefficients,
            intercept,
        }
    }

    /// Rebuilds a posterior usable for prediction on `p` columns.
    pub fn to_posterior(&self, p: usize, hyper: Hyperparams<f64>) -> ecap::Result<CoefficientPosterior<f64>> {
        let k = self.mean.len();
        if self.config.len() != k || self.cov.len() != k {
            return Err(ecap::EcapError::DimensionMismatch("posterior config, mean and cov disagree in length".into()));
        }
        Ok(CoefficientPosterior {
            config: Configuration::new(self.config.clone(), p)?,
            mean: self.mean.clone(),
            cov: Matrix::from_fn(k, k, |i, j| self.cov[i][j]),
            hyper,
        })
    }
}

#[derive(Debug, Serialize)]
pub struct AlassoReport {
    pub support: Vec<usize>,
    pub sigma2: f64,
}

#[derive(Debug, Serialize)]
pub struct SelectReport {
    pub command: &'static str,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub column_names: Option<Vec<String>>,
    /// Columns kept by marginal screening, when it was requested.
    pub screened: Option<Vec<usize>>,
    pub standardization: Standardization<f64>,
    pub hyperparameters: HyperReport,
    pub adaptive_lasso: AlassoReport,
    pub lambda_objective: Option<CurveReport>,
    pub mpm: Vec<usize>,
    pub map: ModelReport,
    pub top_models: Vec<ModelReport>,
    pub inclusion_probabilities: Vec<f64>,
    pub visited: usize,
    pub posterior: Option<PosteriorReport>,
}

/// The parts of a select document that prediction needs.
#[derive(Debug, Deserialize)]
pub struct FitView {
    pub p: usize,
    pub standardization: Standardization<f64>,
    pub posterior: Option<PosteriorReport>,
}

#[derive(Debug, Serialize)]
pub struct EnumerateReport {
    pub command: &'static str,
    pub n: usize,
    pub p: usize,
    pub column_names: Option<Vec<String>>,
    pub hyperparameters: HyperReport,
    pub models_scored: usize,
    pub argmax: ModelReport,
    pub mpm: Vec<usize>,
    pub inclusion_probabilities: Vec<f64>,
    pub top_models: Vec<ModelReport>,
}

/// Top `m` visited models with their share of the visited mass.
pub fn top_models(ledger: &VisitedLedger<f64>, m: usize, map: &dyn Fn(&Configuration) -> Vec<usize>) -> ecap::Result<Vec<ModelReport>> {
    let masses = ledger.normalized_mass()?;
    let lookup: std::collections::BTreeMap<&Configuration, f64> = masses.into_iter().collect();
    Ok(ledger.top(m).into_iter().map(|s| ModelReport::new(s, lookup.get(&s.config).copied().unwrap_or(0.0), map)).collect())
}

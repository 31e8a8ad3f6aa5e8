//! Run configuration: an optional TOML file, overridden field by field by
//! command-line flags.

use std::path::{Path, PathBuf};

use ecap::lasso::PathCriterion;
use ecap::tuning::lambda_grid;
use ecap::{GMode, LambdaChoice, SearchSettings, TuningSettings};
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub hyper: HyperSection,
    #[serde(default)]
    pub lambda_grid: Option<GridSpec>,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub io: IoSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSection {
    pub alpha: Option<f64>,
    pub a: Option<f64>,
    pub c: Option<f64>,
    pub kappa_max: Option<f64>,
    pub rank_cap: Option<usize>,
    /// `"auto"` or a number.
    pub lambda: Option<LambdaValue>,
    pub g_mode: Option<GMode>,
    pub phi: Option<f64>,
    pub sigma2: Option<f64>,
    pub importance_samples: Option<usize>,
    pub path_criterion: Option<CriterionName>,
    /// `γ` of the extended criterion.
    pub ebic_gamma: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum LambdaValue {
    Value(f64),
    Word(AutoWord),
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoWord {
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionName {
    Bic,
    Ebic,
}

/// Either explicit values or an evenly spaced range.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum GridSpec {
    Values { values: Vec<f64> },
    Range { lo: f64, hi: f64, step: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub iterations: Option<usize>,
    pub restarts: Option<usize>,
    pub screen_k: Option<usize>,
    pub top_k: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoSection {
    pub x: Option<PathBuf>,
    pub y: Option<PathBuf>,
    pub header: Option<bool>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Progress messages on stderr.
    pub verbose: Option<bool>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

/// Parses `"auto"` or a number.
pub fn parse_lambda(s: &str) -> Result<LambdaChoice, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(LambdaChoice::Auto);
    }
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(LambdaChoice::Fixed)
        .ok_or_else(|| format!("expected \"auto\" or a number, got {s:?}"))
}

/// `lo:hi:step` or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(GridSpec::Values { values: Vec::new() });
    }
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("range must be lo:hi:step, got {s:?}"));
        }
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("not a number: {t:?}"));
        return Ok(GridSpec::Range { lo: num(parts[0])?, hi: num(parts[1])?, step: num(parts[2])? });
    }
    let values = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("not a number: {t:?}")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GridSpec::Values { values })
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            GridSpec::Values { values } => values.clone(),
            GridSpec::Range { lo, hi, step } => lambda_grid(*lo, *hi, *step),
        }
    }
}

/// Flag values that override the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub iters: Option<usize>,
    pub restarts: Option<usize>,
    pub screen_k: Option<usize>,
    pub lambda: Option<LambdaChoice>,
    pub lambda_grid: Option<GridSpec>,
    pub top_k: Option<usize>,
    pub x: Option<PathBuf>,
    pub y: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub header: bool,
}

/// Everything a command needs after merging file and flags.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub seed: u64,
    pub tuning: TuningSettings,
    pub search: SearchSettings,
    pub top_k: Option<usize>,
    pub x: Option<PathBuf>,
    pub y: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub header: bool,
    pub verbose: bool,
}

pub fn resolve(cfg: &RunConfig, o: &Overrides) -> Result<Resolved, CliError> {
    let mut tuning = TuningSettings::default();
    let h = &cfg.hyper;
    if let Some(v) = h.alpha {
        tuning.alpha = v;
    }
    if let Some(v) = h.a {
        tuning.a = v;
    }
    if let Some(v) = h.c {
        tuning.c = v;
    }
    if let Some(v) = h.kappa_max {
        tuning.kappa_max = v;
    }
    tuning.rank_cap = h.rank_cap;
    tuning.phi = h.phi;
    tuning.sigma2 = h.sigma2;
    if let Some(v) = h.importance_samples {
        tuning.importance_samples = v;
    }
    tuning.lambda = match (o.lambda, h.lambda) {
        (Some(l), _) => l,
        (None, Some(LambdaValue::Value(v))) => LambdaChoice::Fixed(v),
        (None, Some(LambdaValue::Word(AutoWord::Auto))) | (None, None) => LambdaChoice::Auto,
    };
    let gamma = h.ebic_gamma.unwrap_or(1.0);
    tuning.path_criterion = match h.path_criterion {
        Some(CriterionName::Bic) => PathCriterion::Bic,
        Some(CriterionName::Ebic) | None => PathCriterion::ExtendedBic { gamma },
    };
    if let Some(g) = o.lambda_grid.as_ref().or(cfg.lambda_grid.as_ref()) {
        tuning.lambda_grid = g.values();
    }
    validate_tuning(&tuning)?;

    let seed = o.seed.or(cfg.seed).unwrap_or(0);
    let s = &cfg.search;
    let defaults = SearchSettings::default();
    let search = SearchSettings {
        iterations: o.iters.or(s.iterations).unwrap_or(defaults.iterations),
        restarts: o.restarts.or(s.restarts).unwrap_or(defaults.restarts),
        screen_k: o.screen_k.or(s.screen_k).unwrap_or(defaults.screen_k),
        seed,
        g_mode: h.g_mode.unwrap_or(defaults.g_mode),
    };
    search.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    Ok(Resolved {
        seed,
        tuning,
        search,
        top_k: o.top_k.or(s.top_k),
        x: o.x.clone().or_else(|| cfg.io.x.clone()),
        y: o.y.clone().or_else(|| cfg.io.y.clone()),
        out: o.out.clone().or_else(|| cfg.io.out.clone()),
        header: o.header || cfg.io.header.unwrap_or(false),
        verbose: cfg.output.verbose.unwrap_or(false),
    })
}

fn validate_tuning(t: &TuningSettings) -> Result<(), CliError> {
    let bad = |m: &str| Err(CliError::Usage(m.to_string()));
    if !(t.alpha > 0.0 && t.alpha < 1.0) {
        return bad("alpha must lie in (0, 1)");
    }
    if !(t.a >= 0.0) || !(t.c > 0.0) {
        return bad("need a >= 0 and c > 0");
    }
    if !(t.kappa_max > 1.0) {
        return bad("kappa_max must exceed 1");
    }
    if let Some(phi) = t.phi {
        if !(0.0..1.0).contains(&phi) {
            return bad("phi must lie in [0, 1)");
        }
    }
    if let Some(s2) = t.sigma2 {
        if !(s2 > 0.0 && s2.is_finite()) {
            return bad("sigma2 must be positive");
        }
    }
    if t.rank_cap == Some(0) {
        return bad("rank_cap must be >= 1");
    }
    if t.importance_samples == 0 {
        return bad("importance_samples must be >= 1");
    }
    if let LambdaChoice::Fixed(v) = t.lambda {
        if !v.is_finite() {
            return bad("lambda must be finite");
        }
    }
    if t.lambda_grid.is_empty() {
        return bad("lambda grid is empty");
    }
    if t.lambda_grid.iter().any(|v| !v.is_finite()) {
        return bad("lambda grid values must be finite");
    }
    if let PathCriterion::ExtendedBic { gamma } = t.path_criterion {
        if !(gamma >= 0.0) {
            return bad("ebic_gamma must be >= 0");
        }
    }
    Ok(())
}

use std::io::Write;
use std::path::Path;

use ecap::io::{read_table_path, read_vector_path, write_rows, write_vector, Table};
use ecap::linalg::{dot, norm_sq};
use ecap::simulation::{run_case, CaseSpec, SimulationSettings};
use ecap::tuning::estimate_g;
use ecap::{
    enumerate_exact, gram_eigen, least_squares, score, screen_marginal, select, standardize, tune, Configuration, Dataset, GMode,
    LambdaChoice, Matrix, Tuned,
};

use crate::config::Resolved;
use crate::report::{
    top_models, AlassoReport, CurveReport, EnumerateReport, FitView, HyperReport, ModelReport, PosteriorReport, SelectReport,
};
use crate::CliError;

const DEFAULT_TOP_K: usize = 10;

pub struct Loaded {
    pub data: Dataset<f64>,
    pub raw_x: Matrix<f64>,
    pub raw_y: Vec<f64>,
    pub names: Option<Vec<String>>,
}

/// Reads the design and the response. The response comes from its own file,
/// or from a named or numbered column of the design file.
pub fn load(r: &Resolved, y_column: Option<&str>) -> Result<Loaded, CliError> {
    let x_path = r.x.as_ref().ok_or_else(|| CliError::Usage("--x is required".into()))?;
    let table = read_table_path(x_path, r.header)?;
    let (raw_y, table) = match (&r.y, y_column) {
        (Some(_), Some(_)) => return Err(CliError::Usage("give either --y or --y-column, not both".into())),
        (Some(y), None) => (read_vector_path(y, r.header)?, table),
        (None, Some(col)) => {
            let j = column_lookup(&table, col)?;
            table.split_column(j)
        }
        (None, None) => return Err(CliError::Usage("--y or --y-column is required".into())),
    };
    let Table { header, columns } = table;
    let mut data = standardize(&raw_y, &columns)?;
    if let Some(h) = &header {
        data = data.with_column_names(h.clone())?;
    }
    if r.verbose {
        eprintln!("loaded n = {}, p = {}", data.n(), data.p());
    }
    Ok(Loaded { data, raw_x: columns, raw_y, names: header })
}

fn column_lookup(table: &Table, col: &str) -> Result<usize, CliError> {
    if let Some(j) = table.column_index(col) {
        return Ok(j);
    }
    match col.parse::<usize>() {
        Ok(j) if j < table.columns.cols() => Ok(j),
        _ => Err(CliError::Usage(format!("no column {col:?} in the design file"))),
    }
}

/// Opens `--out` or stdout.
pub fn sink(out: &Option<std::path::PathBuf>) -> Result<Box<dyn Write>, CliError> {
    match out {
        Some(p) => {
            let f = std::fs::File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            Ok(Box::new(std::io::BufWriter::new(f)))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn write_json<T: serde::Serialize>(out: &Option<std::path::PathBuf>, doc: &T) -> Result<(), CliError> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, doc).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::Io(e.to_string()))
}

fn hyper_report(t: &Tuned<f64>, r: &Resolved) -> HyperReport {
    HyperReport {
        lambda: t.hyper.lambda,
        lambda_source: match r.tuning.lambda {
            LambdaChoice::Auto => "estimated",
            LambdaChoice::Fixed(_) => "fixed",
        },
        g: t.hyper.g,
        g_mode: r.search.g_mode,
        phi: t.hyper.phi,
        phi_hat: t.phi.phi_hat,
        sigma2: t.hyper.sigma2,
        alpha: t.hyper.alpha,
        a: t.prior.a,
        c: t.prior.c,
        kappa_max: t.prior.kappa_max,
        rank_cap: t.prior.rank_cap,
    }
}

pub fn cmd_select(r: &Resolved, y_column: Option<&str>, prescreen: Option<usize>) -> Result<(), CliError> {
    let loaded = load(r, y_column)?;
    let p = loaded.data.p();
    // optional marginal screening; indices are mapped back to the full design
    let (work, kept) = match prescreen {
        Some(k) if k < p => {
            if k == 0 {
                return Err(CliError::Usage("--prescreen must be >= 1".into()));
            }
            let kept = screen_marginal(&loaded.data, k).indices().to_vec();
            let sub = standardize(&loaded.raw_y, &loaded.raw_x.select_columns(&kept))?;
            (sub, Some(kept))
        }
        _ => (loaded.data.clone(), None),
    };
    let to_full = |c: &Configuration| -> Vec<usize> {
        match &kept {
            Some(k) => c.indices().iter().map(|&j| k[j]).collect(),
            None => c.indices().to_vec(),
        }
    };
    let sel = select(&work, &r.tuning, &r.search, r.seed)?;
    if r.verbose {
        eprintln!("visited {} models", sel.ledger.len());
    }
    let mut inclusion = vec![0.0; p];
    for (j, q) in sel.inclusion.iter().enumerate() {
        inclusion[kept.as_ref().map_or(j, |k| k[j])] = *q;
    }
    let masses = sel.ledger.normalized_mass()?;
    let map_mass = masses.iter().find(|(c, _)| **c == sel.map.config).map_or(0.0, |(_, m)| *m);
    let posterior = sel.posterior.as_ref().map(|post| PosteriorReport::new(post, to_full(&post.config), loaded.data.scaling()));
    let doc = SelectReport {
        command: "select",
        seed: r.seed,
        n: loaded.data.n(),
        p,
        column_names: loaded.names.clone(),
        screened: kept.clone(),
        standardization: loaded.data.scaling().clone(),
        hyperparameters: hyper_report(&sel.tuned, r),
        adaptive_lasso: AlassoReport { support: to_full(&sel.tuned.alasso.support), sigma2: sel.tuned.alasso.sigma2 },
        lambda_objective: sel.tuned.lambda_objective.as_ref().map(CurveReport::from),
        mpm: to_full(&sel.mpm),
        map: ModelReport::new(&sel.map, map_mass, &to_full),
        top_models: top_models(&sel.ledger, r.top_k.unwrap_or(DEFAULT_TOP_K), &to_full)?,
        inclusion_probabilities: inclusion,
        visited: sel.ledger.len(),
        posterior,
    };
    write_json(&r.out, &doc)
}

pub fn cmd_tune(r: &Resolved, y_column: Option<&str>) -> Result<(), CliError> {
    let loaded = load(r, y_column)?;
    let t = tune(&loaded.data, &r.tuning, r.seed)?;
    let mut w = sink(&r.out)?;
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    writeln!(w, "# lambda_hat = {}", t.hyper.lambda).map_err(io)?;
    writeln!(w, "# phi = {}", t.hyper.phi).map_err(io)?;
    writeln!(w, "# sigma2 = {}", t.hyper.sigma2).map_err(io)?;
    writeln!(w, "# g = {}", t.hyper.g).map_err(io)?;
    writeln!(w, "lambda,log_objective").map_err(io)?;
    if let Some(obj) = &t.lambda_objective {
        for (l, v) in obj.grid.iter().zip(&obj.values) {
            writeln!(w, "{l},{v}").map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn cmd_simulate(r: &Resolved, case: u32, reps: usize, baselines: bool) -> Result<(), CliError> {
    if reps == 0 {
        return Err(CliError::Usage("--reps must be >= 1".into()));
    }
    let spec = CaseSpec::case(case)?;
    let settings = SimulationSettings { reps, seed: r.seed, tuning: r.tuning.clone(), search: r.search.clone(), baselines };
    let report = run_case(&spec, &settings)?;
    if r.verbose {
        for rep in report.replications.iter().filter(|x| x.error.is_some()) {
            eprintln!("replication {} failed: {}", rep.index, rep.error.as_deref().unwrap_or(""));
        }
    }
    let header = [
        "case",
        "method",
        "reps",
        "failures",
        "prob_exact",
        "prob_exact_se",
        "prob_superset",
        "prob_superset_se",
        "avg_size",
        "avg_size_se",
    ];
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|m| {
            vec![
                case.to_string(),
                m.method.clone(),
                (m.completed + m.failures).to_string(),
                m.failures.to_string(),
                m.prob_exact.to_string(),
                m.prob_exact_se.to_string(),
                m.prob_superset.to_string(),
                m.prob_superset_se.to_string(),
                m.avg_size.to_string(),
                m.avg_size_se.to_string(),
            ]
        })
        .collect();
    let w = sink(&r.out)?;
    write_rows(w, &header, &rows)?;
    Ok(())
}

pub fn cmd_predict(r: &Resolved, y_column: Option<&str>, fit: Option<&Path>, x_new: &Path) -> Result<(), CliError> {
    let new_x = read_table_path(x_new, r.header)?.columns;
    let (scaling, posterior, p) = match fit {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let view: FitView = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            (view.standardization, view.posterior, view.p)
        }
        None => {
            let loaded = load(r, y_column)?;
            let sel = select(&loaded.data, &r.tuning, &r.search, r.seed)?;
            let post = sel.posterior.as_ref().map(|post| PosteriorReport::new(post, post.config.indices().to_vec(), loaded.data.scaling()));
            (loaded.data.scaling().clone(), post, loaded.data.p())
        }
    };
    let preds = match posterior {
        Some(post) => {
            let placeholder = ecap::Hyperparams::new(0.0, 1.0, 0.0, 0.5, 1.0)?;
            let post = post.to_posterior(p, placeholder)?;
            ecap::predict(&post, &new_x, &scaling)?
        }
        None => {
            // empty model: the training mean, after checking the width
            scaling.apply_x(&new_x)?;
            vec![scaling.y_mean; new_x.rows()]
        }
    };
    let mut w = sink(&r.out)?;
    write_vector(&mut w, "prediction", &preds).and_then(|_| w.flush()).map_err(|e| CliError::Io(e.to_string()))
}

pub fn cmd_screen(r: &Resolved, y_column: Option<&str>) -> Result<(), CliError> {
    let loaded = load(r, y_column)?;
    let data = &loaded.data;
    let k = r.top_k.unwrap_or(data.p()).min(data.p());
    let kept = screen_marginal(data, k);
    let y_norm = norm_sq(data.y()).sqrt();
    let mut scored: Vec<(usize, f64)> = kept
        .indices()
        .iter()
        .map(|&j| {
            let c = data.column(j);
            let denom = norm_sq(c).sqrt() * y_norm;
            (j, if denom > 0.0 { (dot(c, data.y()) / denom).abs() } else { 0.0 })
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let rows: Vec<Vec<String>> = scored
        .iter()
        .enumerate()
        .map(|(rank, (j, c))| {
            let name = loaded.names.as_ref().map_or_else(String::new, |h| h[*j].clone());
            vec![(rank + 1).to_string(), j.to_string(), name, c.to_string()]
        })
        .collect();
    write_rows(sink(&r.out)?, &["rank", "index", "name", "abs_corr"], &rows)?;
    Ok(())
}

pub fn cmd_enumerate(r: &Resolved, y_column: Option<&str>) -> Result<(), CliError> {
    let loaded = load(r, y_column)?;
    let data = &loaded.data;
    if data.p() > ecap::search::MAX_ENUMERATION_P {
        return Err(ecap::EcapError::TooLarge(data.p()).into());
    }
    let t = tune(data, &r.tuning, r.seed)?;
    let exact = enumerate_exact(data, &t.hyper, &t.prior, r.search.g_mode)?;
    let ident = |c: &Configuration| c.indices().to_vec();
    let mut order: Vec<usize> = (0..exact.models.len()).filter(|&i| exact.models[i].is_finite()).collect();
    order.sort_by(|&a, &b| {
        exact.models[b].log_score.partial_cmp(&exact.models[a].log_score).unwrap().then_with(|| exact.models[a].config.cmp(&exact.models[b].config))
    });
    order.truncate(r.top_k.unwrap_or(DEFAULT_TOP_K));
    let argmax = exact.argmax();
    let argmax_prob = exact.models.iter().zip(&exact.probs).find(|(m, _)| m.config == argmax.config).map_or(0.0, |(_, q)| *q);
    let doc = EnumerateReport {
        command: "enumerate",
        n: data.n(),
        p: data.p(),
        column_names: loaded.names.clone(),
        hyperparameters: hyper_report(&t, r),
        models_scored: exact.models.len(),
        argmax: ModelReport::new(argmax, argmax_prob, &ident),
        mpm: exact.median_probability_model().indices().to_vec(),
        inclusion_probabilities: exact.inclusion.clone(),
        top_models: order.iter().map(|&i| ModelReport::new(&exact.models[i], exact.probs[i], &ident)).collect(),
    };
    write_json(&r.out, &doc)
}

/// `"0,1;0;0,1,2"`: configurations separated by `;`, indices by `,`. An
/// empty segment is the empty configuration.
pub fn parse_configs(s: &str, p: usize) -> Result<Vec<Configuration>, CliError> {
    s.split(';')
        .map(|seg| {
            let idx = seg
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<usize>().map_err(|_| CliError::Usage(format!("bad index {t:?} in --configs"))))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Configuration::new(idx, p)?)
        })
        .collect()
}

pub fn cmd_curve(r: &Resolved, y_column: Option<&str>, configs: &str) -> Result<(), CliError> {
    let loaded = load(r, y_column)?;
    let data = &loaded.data;
    let configs = parse_configs(configs, data.p())?;
    // σ̂² and φ̃ as in select; λ is swept here, so none is estimated
    let fixed = ecap::TuningSettings { lambda: LambdaChoice::Fixed(0.0), ..r.tuning.clone() };
    let t = tune(data, &fixed, r.seed)?;
    let reference = if t.alasso.empty {
        None
    } else {
        let ge = gram_eigen(data, &t.alasso.support)?;
        let ls = least_squares(data, &t.alasso.support, &ge);
        Some((ge, ls))
    };
    let mut rows = Vec::new();
    for &lambda in &r.tuning.lambda_grid {
        let mut h = ecap::Hyperparams { lambda, ..t.hyper };
        if let (GMode::Global, Some((ge, ls))) = (r.search.g_mode, &reference) {
            h.g = estimate_g(data, ge, ls, &h);
        }
        for c in &configs {
            let m = score(data, c, &h, &t.prior, r.search.g_mode);
            rows.push(vec![config_label(c), lambda.to_string(), m.log_score.to_string(), m.log_marginal.to_string(), m.log_prior.to_string(), m.g.to_string()]);
        }
    }
    write_rows(sink(&r.out)?, &["config", "lambda", "log_score", "log_marginal", "log_prior", "g"], &rows)?;
    Ok(())
}

/// Space-separated indices, so the CSV field needs no quoting.
fn config_label(c: &Configuration) -> String {
    c.indices().iter().map(|j| j.to_string()).collect::<Vec<_>>().join(" ")
}

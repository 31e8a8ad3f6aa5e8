//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any failed.
//!
//! `cargo test --release -p ecap --test acceptance -- 3 4 11` runs a subset.

use std::num::NonZeroUsize;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use gauss_quad::GaussHermite;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ecap::linalg::symmetric_eigen;
use ecap::model::k_factor;
use ecap::search::VisitedLedger;
use ecap::simulation::{gen_case, lambda_hats, replication_seed, run_case, CaseSpec, MetricsRow, SimulationSettings};
use ecap::tuning::estimate_g;
use ecap::{
    coefficient_posterior, enumerate_exact, gram_eigen, lasso_default, least_squares, log_marginal, run_search, score, select,
    standardize, tune, Configuration, Dataset, GMode, GramEigen, Hyperparams, LambdaChoice, Matrix, PathCriterion, PriorConfig,
    SearchSettings, TuningSettings,
};

const REPS: usize = 100;
const ROOT_SEED: u64 = 2024;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gaussian_matrix(n: usize, p: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    Matrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

// ---------------------------------------------------------------------------
// 1. search against enumeration

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (n, p) = (40, 8);
    let mut agree = 0;
    let mut first_miss = None;
    for inst in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + inst);
        let x = gaussian_matrix(n, p, &mut rng);
        let truth = {
            let a = rng.random_range(0..p);
            let mut b = rng.random_range(0..p - 1);
            if b >= a {
                b += 1;
            }
            [a, b]
        };
        let y: Vec<f64> = (0..n).map(|i| 5.0 * (x[(i, truth[0])] + x[(i, truth[1])]) + rng.sample::<f64, _>(StandardNormal)).collect();
        let data = standardize(&y, &x).unwrap();
        let sel = select(&data, &TuningSettings::default(), &SearchSettings::default(), inst).unwrap();
        let exact = enumerate_exact(&data, &sel.tuned.hyper, &sel.tuned.prior, GMode::PerModel).unwrap();
        if exact.argmax().config == sel.map.config {
            agree += 1;
        } else if first_miss.is_none() {
            first_miss = Some(inst);
        }
    }
    let t = start.elapsed();
    let pass = agree >= 99 && t < Duration::from_secs(120);
    outcome(pass, format!("MAP == enumeration argmax in {agree}/100 (need >= 99), first miss {first_miss:?}, {} (limit 120s)", secs(t)))
}

// ---------------------------------------------------------------------------
// 2. closed-form marginal against quadrature

/// Symmetric 2x2 or 1x1 eigensystem in closed form: values and unit vectors.
fn small_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<[f64; 2]>) {
    if a.len() == 1 {
        return (vec![a[0][0]], vec![[1.0, 0.0]]);
    }
    let (p, q, r) = (a[0][0], a[0][1], a[1][1]);
    let mid = 0.5 * (p + r);
    let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
    let vals = vec![mid + rad, mid - rad];
    let vecs = vals
        .iter()
        .map(|&l| {
            // (A - l I) v = 0
            let (vx, vy) = if q.abs() > 1e-300 { (q, l - p) } else if (p - l).abs() < (r - l).abs() { (1.0, 0.0) } else { (0.0, 1.0) };
            let norm = (vx * vx + vy * vy).sqrt();
            [vx / norm, vy / norm]
        })
        .collect();
    (vals, vecs)
}

/// `log ∫ (2πσ²)^{-n/2} exp(-α||y - Xβ||²/2σ²) N(β; φβ̂, σ² g k (X'X)^λ) dβ`
/// by tensor Gauss–Hermite, with the likelihood factor absorbed into the
/// weight function around the least-squares point.
fn quadrature_log_marginal(y: &[f64], cols: &[Vec<f64>], h: &Hyperparams<f64>, rule: &GaussHermite) -> f64 {
    let s = cols.len();
    let n = y.len();
    let xtx: Vec<Vec<f64>> = (0..s).map(|a| (0..s).map(|b| cols[a].iter().zip(&cols[b]).map(|(u, v)| u * v).sum()).collect()).collect();
    let xty: Vec<f64> = (0..s).map(|a| cols[a].iter().zip(y).map(|(u, v)| u * v).sum()).collect();
    // least squares by Cramer's rule
    let beta_hat: Vec<f64> = if s == 1 {
        vec![xty[0] / xtx[0][0]]
    } else {
        let det = xtx[0][0] * xtx[1][1] - xtx[0][1] * xtx[1][0];
        vec![(xty[0] * xtx[1][1] - xtx[0][1] * xty[1]) / det, (xtx[0][0] * xty[1] - xtx[1][0] * xty[0]) / det]
    };
    let rss: f64 = (0..n)
        .map(|i| {
            let fit: f64 = (0..s).map(|a| cols[a][i] * beta_hat[a]).sum();
            (y[i] - fit).powi(2)
        })
        .sum();
    let (d, vecs) = small_eigen(&xtx);
    let k = d.iter().map(|v| 1.0 / v).sum::<f64>() / d.iter().map(|v| v.powf(h.lambda)).sum::<f64>();
    let scale = h.sigma2 * h.g * k;
    // prior precision V^{-1} = Σ v v' / (scale d^λ), log det V = Σ log(scale d^λ)
    let log_det_v: f64 = d.iter().map(|v| (scale * v.powf(h.lambda)).ln()).sum();
    let prior_log_density = |beta: &[f64]| -> f64 {
        let mut quad = 0.0;
        for (dv, v) in d.iter().zip(&vecs) {
            let proj: f64 = (0..s).map(|a| v[a] * (beta[a] - h.phi * beta_hat[a])).sum();
            quad += proj * proj / (scale * dv.powf(h.lambda));
        }
        -0.5 * (s as f64) * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det_v - 0.5 * quad
    };
    // β = β̂ + √2 L z with L L' = σ²/α (X'X)^{-1}, via the same closed-form eigensystem
    let lmat: Vec<[f64; 2]> = (0..s).map(|a| {
        let mut row = [0.0; 2];
        for (i, (dv, v)) in d.iter().zip(&vecs).enumerate() {
            row[i] = v[a] * (h.sigma2 / (h.alpha * dv)).sqrt();
        }
        row
    }).collect();
    let log_jac: f64 = d.iter().map(|dv| (2.0 * h.sigma2 / (h.alpha * dv)).sqrt().ln()).sum();
    let nodes: Vec<(f64, f64)> = rule.iter().map(|(x, w)| (*x, *w)).collect();
    let mut terms = Vec::new();
    let sqrt2 = 2f64.sqrt();
    match s {
        1 => {
            for &(z, w) in &nodes {
                let b = [beta_hat[0] + sqrt2 * lmat[0][0] * z];
                terms.push(w.ln() + prior_log_density(&b));
            }
        }
        _ => {
            for &(z1, w1) in &nodes {
                for &(z2, w2) in &nodes {
                    let b: Vec<f64> = (0..2).map(|a| beta_hat[a] + sqrt2 * (lmat[a][0] * z1 + lmat[a][1] * z2)).collect();
                    terms.push(w1.ln() + w2.ln() + prior_log_density(&b));
                }
            }
        }
    }
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
    -(n as f64 / 2.0) * (2.0 * std::f64::consts::PI * h.sigma2).ln() - h.alpha * rss / (2.0 * h.sigma2) + log_jac + log_sum
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let rule = GaussHermite::new(NonZeroUsize::new(80).unwrap());
    let lambdas = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let mut worst_pair = 0.0f64;
    let mut worst_abs = 0.0f64;
    for inst in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + inst);
        let n = 30;
        let x = gaussian_matrix(n, 2, &mut rng);
        let y: Vec<f64> = (0..n).map(|i| 0.6 * x[(i, 0)] - 0.4 * x[(i, 1)] + rng.sample::<f64, _>(StandardNormal)).collect();
        let data = Dataset::from_parts(y.clone(), x.clone()).unwrap();
        let sigma2 = rng.random_range(0.5..2.0);
        let g = if inst % 2 == 0 { 5.0 } else { 50.0 };
        let phi = if inst % 3 == 0 { 0.4 } else { 0.0 };
        for s in [1usize, 2] {
            let config = Configuration::new((0..s).collect(), 2).unwrap();
            let ge = gram_eigen(&data, &config).unwrap();
            let ls = least_squares(&data, &config, &ge);
            let cols: Vec<Vec<f64>> = (0..s).map(|j| x.col(j).to_vec()).collect();
            let mut ours = Vec::new();
            let mut oracle = Vec::new();
            for &lambda in &lambdas {
                let h = Hyperparams::new(lambda, g, phi, 0.999, sigma2).unwrap();
                ours.push(log_marginal(&data, &ge, &ls, &h).unwrap());
                oracle.push(quadrature_log_marginal(&y, &cols, &h, &rule));
            }
            for i in 0..lambdas.len() {
                worst_abs = worst_abs.max((ours[i] - oracle[i]).abs());
                for j in 0..i {
                    worst_pair = worst_pair.max(((ours[i] - ours[j]) - (oracle[i] - oracle[j])).abs());
                }
            }
        }
    }
    let t = start.elapsed();
    let pass = worst_pair <= 1e-6 && t < Duration::from_secs(60);
    outcome(pass, format!("max pairwise-difference error {worst_pair:.2e} (tol 1e-6), max absolute error {worst_abs:.2e}, {}", secs(t)))
}

// ---------------------------------------------------------------------------
// 3. k_S identity

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid: Vec<f64> = (0..=24).map(|i| -3.0 + 0.25 * i as f64).collect();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let s = rng.random_range(1..=8);
        let spectrum: Vec<f64> = (0..s).map(|_| 10f64.powf(rng.random_range(-3.0..3.0))).collect();
        // diagonal, so the eigenvalues the library sees are exactly these
        let gram = Matrix::from_fn(s, s, |a, b| if a == b { spectrum[a] } else { 0.0 });
        let ge = GramEigen::from_gram(&gram).unwrap();
        let inv_trace: f64 = spectrum.iter().map(|d| 1.0 / d).sum();
        for &lambda in &grid {
            let lhs = k_factor(&ge, lambda) * spectrum.iter().map(|d| d.powf(lambda)).sum::<f64>();
            worst = worst.max((lhs - inv_trace).abs() / inv_trace);
        }
    }
    outcome(worst <= 1e-10, format!("max relative error {worst:.2e} over 1000 spectra x 25 lambdas (tol 1e-10)"))
}

// ---------------------------------------------------------------------------
// 4. ĝ against max{F - 1, 0}

fn criterion_4() -> Outcome {
    let mut worst = 0.0f64;
    let mut clamped = 0;
    for inst in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + inst);
        let (n, s) = (50, 1 + (inst as usize % 4));
        let x = gaussian_matrix(n, s, &mut rng);
        let strength = if inst % 5 == 0 { 0.0 } else { 0.4 };
        let y: Vec<f64> = (0..n).map(|i| (0..s).map(|j| strength * x[(i, j)]).sum::<f64>() + rng.sample::<f64, _>(StandardNormal)).collect();
        let data = standardize(&y, &x).unwrap();
        let config = Configuration::new((0..s).collect(), s).unwrap();
        let ge = gram_eigen(&data, &config).unwrap();
        let ls = least_squares(&data, &config, &ge);
        let sigma2 = 1.0;
        let h = Hyperparams::new(-1.0, 1.0, 0.0, 0.999, sigma2).unwrap();
        let g_hat = estimate_g(&data, &ge, &ls, &h);
        // F statistic from the fitted values, computed directly
        let explained: f64 = ls.y_hat.iter().map(|v| v * v).sum();
        let f = explained / (s as f64 * sigma2);
        if f <= 1.0 {
            clamped += 1;
        }
        worst = worst.max((g_hat - (f - 1.0).max(0.0)).abs() / (1.0 + f));
    }
    outcome(worst <= 1e-3, format!("max |g - max(F-1,0)| / (1+F) = {worst:.2e} (tol 1e-3), {clamped} instances with F <= 1"))
}

// ---------------------------------------------------------------------------
// 5-8. simulation cases

fn case_row(case: u32, tuning: TuningSettings) -> (MetricsRow, Duration) {
    let start = Instant::now();
    let settings = SimulationSettings { reps: REPS, seed: ROOT_SEED, tuning, search: SearchSettings::default(), baselines: false };
    let report = run_case(&CaseSpec::case(case).unwrap(), &settings).unwrap();
    (report.rows[0].clone(), start.elapsed())
}

fn describe(r: &MetricsRow, t: Duration) -> String {
    format!(
        "prob_exact {:.3} (se {:.3}), prob_superset {:.3} (se {:.3}), avg_size {:.2} (se {:.2}), failures {}, {}",
        r.prob_exact,
        r.prob_exact_se,
        r.prob_superset,
        r.prob_superset_se,
        r.avg_size,
        r.avg_size_se,
        r.failures,
        secs(t)
    )
}

fn consistent(r: &MetricsRow) -> bool {
    r.failures == 0 && r.prob_exact <= r.prob_superset
}

fn criterion_5() -> Outcome {
    let (r, t) = case_row(2, TuningSettings::default());
    let pass = consistent(&r) && r.prob_exact >= 0.90 && r.prob_superset >= 0.99 && (9.8..=10.3).contains(&r.avg_size) && t < Duration::from_secs(3600);
    outcome(pass, format!("case 2: {} (need exact >= 0.90, superset >= 0.99, size in [9.8, 10.3])", describe(&r, t)))
}

fn criterion_6() -> Outcome {
    let (r, t) = case_row(5, TuningSettings::default());
    let pass = consistent(&r) && (0.70..=0.95).contains(&r.prob_exact) && (0.82..=1.0).contains(&r.prob_superset) && (4.6..=5.4).contains(&r.avg_size);
    outcome(pass, format!("case 5: {} (need exact in [0.70, 0.95], superset in [0.82, 1], size in [4.6, 5.4])", describe(&r, t)))
}

fn criterion_7() -> Outcome {
    let (r, t) = case_row(4, TuningSettings::default());
    let pass = consistent(&r) && r.prob_exact >= 0.75;
    outcome(pass, format!("case 4: {} (need exact >= 0.75)", describe(&r, t)))
}

fn criterion_8() -> Outcome {
    let (r, t) = case_row(1, TuningSettings::default());
    // the comparison method fixes λ = -1
    let eb = TuningSettings { lambda: LambdaChoice::Fixed(-1.0), ..TuningSettings::default() };
    let (e, te) = case_row(1, eb);
    let pass = consistent(&r) && r.prob_exact > 0.10;
    outcome(
        pass,
        format!(
            "case 1: {} (need exact > 0.10); lambda fixed at -1: prob_exact {:.3}, gap {:+.3}, {}",
            describe(&r, t),
            e.prob_exact,
            r.prob_exact - e.prob_exact,
            secs(te)
        ),
    )
}

// ---------------------------------------------------------------------------
// 9. sign of λ̂

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let tuning = TuningSettings { phi: Some(0.0), importance_samples: 4000, ..TuningSettings::default() };
    let count = |spread: bool, positive: bool| -> (usize, usize) {
        let hats = lambda_hats(&CaseSpec::lambda_direction(spread), REPS, ROOT_SEED, &tuning).unwrap();
        let done = hats.iter().flatten().count();
        (hats.iter().flatten().filter(|&&l| if positive { l > 0.0 } else { l < 0.0 }).count(), done)
    };
    let (adjacent, done_a) = count(false, true);
    let (spread, done_s) = count(true, false);
    let t = start.elapsed();
    let pass = adjacent >= 70 && spread >= 70 && t < Duration::from_secs(1200);
    outcome(
        pass,
        format!("adjacent truth: lambda > 0 in {adjacent}/{done_a}; spread truth: lambda < 0 in {spread}/{done_s} (need >= 70 each), {}", secs(t)),
    )
}

// ---------------------------------------------------------------------------
// 10. illustration curves

fn mean_scores(rho: f64, lambda: f64, configs: &[Vec<usize>]) -> Vec<f64> {
    let spec = CaseSpec::illustration(rho);
    let mut sums = vec![0.0; configs.len()];
    let mut used = 0;
    for seed in 0..100u64 {
        let (data, _) = gen_case(&spec, replication_seed(10, seed as usize)).unwrap();
        let h = Hyperparams::new(lambda, 1.0, 0.0, 0.999, 1.0).unwrap();
        let pc = PriorConfig::new(0.05, 1.0, 5, 4, 1e8).unwrap();
        let scores: Vec<f64> = configs
            .iter()
            .map(|c| score(&data, &Configuration::new(c.clone(), 5).unwrap(), &h, &pc, GMode::PerModel).log_score)
            .collect();
        if scores.iter().all(|v| v.is_finite()) {
            used += 1;
            for (s, v) in sums.iter_mut().zip(&scores) {
                *s += v;
            }
        }
    }
    sums.iter().map(|s| s / used as f64).collect()
}

fn criterion_10() -> Outcome {
    let configs = [vec![0, 1], vec![0], vec![0, 1, 2]];
    let high = mean_scores(0.8, 2.0, &configs);
    let low_neg = mean_scores(0.1, -2.0, &configs);
    let low_pos = mean_scores(0.1, 2.0, &configs);
    let pass = high[0] > high[1] && low_neg[0] > low_neg[2];
    outcome(
        pass,
        format!(
            "rho 0.8, lambda 2: S* {:.3} vs S- {:.3}; rho 0.1, lambda -2: S* {:.3} vs S+ {:.3} (lambda 2: S* {:.3}, S+ {:.3})",
            high[0], high[1], low_neg[0], low_neg[2], low_pos[0], low_pos[2]
        ),
    )
}

// ---------------------------------------------------------------------------
// 11. lasso optimality

fn criterion_11() -> Outcome {
    let mut worst = 0.0f64;
    let mut solutions = 0;
    for inst in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(11_000 + inst);
        let (n, p) = (40 + (inst as usize % 3) * 20, 30 + (inst as usize % 5) * 40);
        let x = gaussian_matrix(n, p, &mut rng);
        let y: Vec<f64> = (0..n).map(|i| 2.0 * x[(i, 0)] - 1.5 * x[(i, 3)] + x[(i, 7)] + rng.sample::<f64, _>(StandardNormal)).collect();
        let data = standardize(&y, &x).unwrap();
        let path = lasso_default(&data, PathCriterion::Bic);
        let nf = n as f64;
        for (level, beta) in path.lambdas.iter().zip(&path.betas) {
            let xb = data.x().matvec(beta);
            let r: Vec<f64> = data.y().iter().zip(&xb).map(|(a, b)| a - b).collect();
            for j in 0..p {
                let c = data.column(j).iter().zip(&r).map(|(u, v)| u * v).sum::<f64>() / nf;
                let v = if beta[j] != 0.0 { (c - level * beta[j].signum()).abs() } else { (c.abs() - level).max(0.0) };
                worst = worst.max(v);
            }
            solutions += 1;
        }
    }
    outcome(worst <= 1e-6, format!("max KKT violation {worst:.2e} over {solutions} path solutions (tol 1e-6)"))
}

// ---------------------------------------------------------------------------
// 12. invariants

fn criterion_12() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let mut check = |ok: bool, what: String| {
        if !ok {
            pass = false;
        }
        notes.push(format!("{}: {}", what, if ok { "ok" } else { "violated" }));
    };

    // normalization of the enumerated posterior
    let mut norm_err = 0.0f64;
    for inst in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(12_000 + inst);
        let x = gaussian_matrix(30, 7, &mut rng);
        let y: Vec<f64> = (0..30).map(|i| x[(i, 1)] + 0.5 * x[(i, 4)] + rng.sample::<f64, _>(StandardNormal)).collect();
        let data = standardize(&y, &x).unwrap();
        let lambda = rng.random_range(-2.0..2.0);
        let h = Hyperparams::new(lambda, 10.0, 0.3, 0.999, 1.0).unwrap();
        let pc = PriorConfig::new(0.05, 1.0, 7, 6, 1e8).unwrap();
        for mode in [GMode::PerModel, GMode::Global] {
            let exact = enumerate_exact(&data, &h, &pc, mode).unwrap();
            norm_err = norm_err.max((exact.probs.iter().sum::<f64>() - 1.0).abs());
        }
    }
    check(norm_err <= 1e-10, format!("enumeration sums to 1 (err {norm_err:.1e})"));

    let mut rng = ChaCha8Rng::seed_from_u64(12_345);
    let (n, p) = (60, 40);
    let x = gaussian_matrix(n, p, &mut rng);
    let y: Vec<f64> = (0..n).map(|i| 1.5 * x[(i, 2)] - x[(i, 9)] + 0.8 * x[(i, 20)] + rng.sample::<f64, _>(StandardNormal)).collect();
    let data = standardize(&y, &x).unwrap();
    let tuned = tune(&data, &TuningSettings::default(), 5).unwrap();

    // ledger: size never shrinks and the best score never drops as models are recorded
    let short = SearchSettings { iterations: 100, restarts: 1, seed: 9, ..SearchSettings::default() };
    let long = SearchSettings { iterations: 300, ..short.clone() };
    let led_short = run_search(&data, &tuned.hyper, &tuned.prior, &short, None).unwrap();
    let led_long = run_search(&data, &tuned.hyper, &tuned.prior, &long, None).unwrap();
    let mut replay = VisitedLedger::new();
    let mut monotone = true;
    let (mut last_len, mut last_best) = (0, f64::NEG_INFINITY);
    for m in led_long.top(led_long.len()).into_iter().rev() {
        replay.record(m.clone());
        monotone &= replay.len() >= last_len && replay.best_score() >= last_best;
        last_len = replay.len();
        last_best = replay.best_score();
    }
    let nested = led_short.top(led_short.len()).iter().all(|m| led_long.top(led_long.len()).iter().any(|l| l.config == m.config));
    check(monotone, "ledger size and best score monotone".into());
    check(nested && led_long.best_score() >= led_short.best_score(), "longer chain visits a superset".into());

    // coefficient posterior covariance is PSD
    let mut min_eig = f64::INFINITY;
    for c in led_long.top(20) {
        if c.config.is_empty() {
            continue;
        }
        let ge = gram_eigen(&data, &c.config).unwrap();
        let ls = least_squares(&data, &c.config, &ge);
        let post = coefficient_posterior(&c.config, &ge, &ls, &Hyperparams { g: c.g, ..tuned.hyper });
        min_eig = min_eig.min(*symmetric_eigen(&post.cov).values.last().unwrap());
    }
    check(min_eig >= 0.0, format!("posterior covariance PSD (min eigenvalue {min_eig:.2e})"));

    // determinism under a fixed seed
    let a = select(&data, &TuningSettings::default(), &SearchSettings::default(), 77).unwrap();
    let b = select(&data, &TuningSettings::default(), &SearchSettings::default(), 77).unwrap();
    check(
        a.mpm == b.mpm && a.inclusion == b.inclusion && a.ledger.len() == b.ledger.len() && a.tuned.hyper == b.tuned.hyper,
        "select deterministic under fixed seed".into(),
    );
    let spec = CaseSpec::case(5).unwrap();
    let settings = SimulationSettings { reps: 1, seed: 3, ..SimulationSettings::default() };
    check(run_case(&spec, &settings).unwrap() == run_case(&spec, &settings).unwrap(), "one-replication simulation deterministic".into());

    outcome(pass, notes.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 12] = [
        (1, "search MAP vs enumeration", criterion_1),
        (2, "marginal vs quadrature", criterion_2),
        (3, "k_S identity", criterion_3),
        (4, "g closed form", criterion_4),
        (5, "case 2 recovery", criterion_5),
        (6, "case 5 recovery", criterion_6),
        (7, "case 4 recovery", criterion_7),
        (8, "case 1 recovery", criterion_8),
        (9, "lambda direction", criterion_9),
        (10, "illustration ordering", criterion_10),
        (11, "lasso KKT", criterion_11),
        (12, "invariants", criterion_12),
    ];
    // libtest flags such as --nocapture are accepted and ignored
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {id:>2} [{name}]: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

//! Simulated designs, the replication runner, and selection metrics.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{standardize, Dataset};
use crate::error::{EcapError, Result};
use crate::lasso::{adaptive_lasso, lasso_default, PathCriterion};
use crate::linalg::Matrix;
use crate::model::Configuration;
use crate::pipeline::select;
use crate::rng::{child_seed, stream, Stream};
use crate::search::SearchSettings;
use crate::tuning::{tune, TuningSettings};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Covariance {
    /// `Σ_jk = ρ^|j-k|`
    Ar1 { rho: f64 },
    /// Two compound-symmetric blocks: `rho1` within the first `|S*|`
    /// columns, `rho2` within the rest, `rho3` between them.
    Block { rho1: f64, rho2: f64, rho3: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub label: String,
    pub n: usize,
    pub p: usize,
    pub covariance: Covariance,
    pub support: Vec<usize>,
    pub beta: Vec<f64>,
    pub sigma2: f64,
}

fn arith(start: f64, step: f64, len: usize) -> Vec<f64> {
    (0..len).map(|k| start + step * k as f64).collect()
}

impl CaseSpec {
    /// The five benchmark cases at `n = 100`, `p = 500`.
    pub fn case(id: u32) -> Result<Self> {
        let ar_support: Vec<usize> = (10..15).chain(30..35).collect();
        let front: Vec<usize> = (0..5).collect();
        let (covariance, support, beta) = match id {
            1 => (Covariance::Ar1 { rho: 0.8 }, ar_support, arith(0.5, 0.05, 10)),
            2 => (Covariance::Ar1 { rho: 0.8 }, ar_support, arith(1.0, 0.5, 10)),
            3 => (Covariance::Block { rho1: 0.25, rho2: 0.75, rho3: 0.5 }, front, arith(0.6, 0.6, 5)),
            4 => (Covariance::Block { rho1: 0.75, rho2: 0.25, rho3: 0.4 }, front, arith(1.0, 0.5, 5)),
            5 => (Covariance::Block { rho1: 0.25, rho2: 0.25, rho3: 0.25 }, front, arith(0.6, 0.6, 5)),
            _ => return Err(EcapError::InvalidArgument(format!("case must be 1..5, got {id}"))),
        };
        let spec = CaseSpec { label: format!("case{id}"), n: 100, p: 500, covariance, support, beta, sigma2: 1.0 };
        spec.validate()?;
        Ok(spec)
    }

    /// AR(1) `ρ = 0.8` designs used to check the sign of `λ̂`: ten signals in
    /// two adjacent runs, or spread evenly across the predictors.
    pub fn lambda_direction(spread: bool) -> Self {
        let support: Vec<usize> = if spread {
            vec![0, 50, 99, 150, 199, 250, 299, 350, 399, 450]
        } else {
            (10..15).chain(30..35).collect()
        };
        CaseSpec {
            label: if spread { "ar1-spread".into() } else { "ar1-adjacent".into() },
            n: 100,
            p: 500,
            covariance: Covariance::Ar1 { rho: 0.8 },
            support,
            beta: arith(1.0, 0.5, 10),
            sigma2: 1.0,
        }
    }

    /// Five observations of five AR(1) predictors with `y = x_1 + 0.8 x_2 + ε`.
    pub fn illustration(rho: f64) -> Self {
        CaseSpec {
            label: format!("illustration-rho{rho}"),
            n: 5,
            p: 5,
            covariance: Covariance::Ar1 { rho },
            support: vec![0, 1],
            beta: vec![1.0, 0.8],
            sigma2: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.support.len() != self.beta.len() {
            return Err(EcapError::DimensionMismatch(format!("{} support indices, {} coefficients", self.support.len(), self.beta.len())));
        }
        Configuration::new(self.support.clone(), self.p)?;
        if !(self.sigma2 >= 0.0) {
            return Err(EcapError::InvalidArgument("sigma2 must be non-negative".into()));
        }
        match self.covariance {
            Covariance::Ar1 { rho } if !(rho.abs() < 1.0) => Err(EcapError::InvalidArgument(format!("AR(1) needs |rho| < 1, got {rho}"))),
            Covariance::Block { rho1, rho2, rho3 } => {
                if self.support != (0..self.support.len()).collect::<Vec<_>>() {
                    return Err(EcapError::InvalidArgument("block designs place the support in the leading columns".into()));
                }
                BlockRoot::new(self.p, self.support.len(), rho1, rho2, rho3).map(|_| ())
            }
            _ => Ok(()),
        }
    }

    pub fn truth(&self) -> Configuration {
        Configuration::new(self.support.clone(), self.p).expect("validated support")
    }
}

/// Rows iid `N(0, Σ)` with `Σ_jk = ρ^|j-k|`, by the AR recursion.
pub fn gen_ar1<R: Rng + ?Sized>(n: usize, p: usize, rho: f64, rng: &mut R) -> Matrix<f64> {
    let innov = (1.0 - rho * rho).sqrt();
    let mut x = Matrix::zeros(n, p);
    for i in 0..n {
        let mut prev: f64 = rng.sample(StandardNormal);
        x.col_mut(0)[i] = prev;
        for j in 1..p {
            let z: f64 = rng.sample(StandardNormal);
            prev = rho * prev + innov * z;
            x.col_mut(j)[i] = prev;
        }
    }
    x
}

/// Symmetric square root of the two-block compound-symmetric covariance.
///
/// With `A` the first `s` coordinates and `B` the rest,
/// `Σ^{1/2} = √(1-ρ1) P_A + √(1-ρ2) P_B + E M^{1/2} E^T`, where `P_A`, `P_B`
/// project onto mean-zero vectors within each block,
/// `E = [1_A/√s, 1_B/√(p-s)]` and `M` is the 2×2 reduced matrix.
#[derive(Clone, Copy, Debug)]
pub struct BlockRoot {
    s: usize,
    p: usize,
    within_a: f64,
    within_b: f64,
    m_root: [[f64; 2]; 2],
}

impl BlockRoot {
    pub fn new(p: usize, s: usize, rho1: f64, rho2: f64, rho3: f64) -> Result<Self> {
        let not_psd = Err(EcapError::NotPsd { rho1, rho2, rho3 });
        if s == 0 || s >= p {
            return Err(EcapError::InvalidArgument(format!("block size {s} must lie in 1..{p}")));
        }
        if (s > 1 && rho1 > 1.0) || (p - s > 1 && rho2 > 1.0) {
            return not_psd;
        }
        let m = reduced_matrix(p, s, rho1, rho2, rho3);
        let (vals, vecs) = eig2(m);
        let tol = 1e-12 * (m[0][0].abs() + m[1][1].abs());
        if vals.iter().any(|&v| v < -tol) {
            return not_psd;
        }
        let r = [vals[0].max(0.0).sqrt(), vals[1].max(0.0).sqrt()];
        let mut m_root = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                m_root[a][b] = r[0] * vecs[0][a] * vecs[0][b] + r[1] * vecs[1][a] * vecs[1][b];
            }
        }
        Ok(BlockRoot {
            s,
            p,
            within_a: (1.0 - rho1).max(0.0).sqrt(),
            within_b: (1.0 - rho2).max(0.0).sqrt(),
            m_root,
        })
    }

    /// `Σ^{1/2} z`
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        let (s, p) = (self.s, self.p);
        let (sa, sb) = (s as f64, (p - s) as f64);
        let sum_a: f64 = z[..s].iter().sum();
        let sum_b: f64 = z[s..].iter().sum();
        let (mean_a, mean_b) = (sum_a / sa, sum_b / sb);
        let e = [sum_a / sa.sqrt(), sum_b / sb.sqrt()];
        let v0 = self.m_root[0][0] * e[0] + self.m_root[0][1] * e[1];
        let v1 = self.m_root[1][0] * e[0] + self.m_root[1][1] * e[1];
        let (add_a, add_b) = (v0 / sa.sqrt(), v1 / sb.sqrt());
        for j in 0..s {
            out[j] = self.within_a * (z[j] - mean_a) + add_a;
        }
        for j in s..p {
            out[j] = self.within_b * (z[j] - mean_b) + add_b;
        }
    }
}

/// `E^T Σ E` for the two block-mean directions.
pub fn reduced_matrix(p: usize, s: usize, rho1: f64, rho2: f64, rho3: f64) -> [[f64; 2]; 2] {
    let (sa, sb) = (s as f64, (p - s) as f64);
    let off = (sa * sb).sqrt() * rho3;
    [[1.0 + (sa - 1.0) * rho1, off], [off, 1.0 + (sb - 1.0) * rho2]]
}

/// Eigenpairs of a symmetric 2×2 matrix; `vecs[k]` belongs to `vals[k]`.
fn eig2(m: [[f64; 2]; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    let (a, b, d) = (m[0][0], m[0][1], m[1][1]);
    let half_tr = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let vals = [half_tr + disc, half_tr - disc];
    if b == 0.0 {
        return if a >= d { (vals, [[1.0, 0.0], [0.0, 1.0]]) } else { (vals, [[0.0, 1.0], [1.0, 0.0]]) };
    }
    let mut vecs = [[0.0; 2]; 2];
    for k in 0..2 {
        let (x, y) = (b, vals[k] - a);
        let norm = (x * x + y * y).sqrt();
        vecs[k] = [x / norm, y / norm];
    }
    (vals, vecs)
}

/// Rows iid `N(0, Σ)` for the two-block design; fails before drawing
/// anything if `Σ` is not positive semi-definite.
pub fn gen_block<R: Rng + ?Sized>(n: usize, p: usize, s_true: usize, rho1: f64, rho2: f64, rho3: f64, rng: &mut R) -> Result<Matrix<f64>> {
    let root = BlockRoot::new(p, s_true, rho1, rho2, rho3)?;
    let mut x = Matrix::zeros(n, p);
    let mut z = vec![0.0; p];
    let mut row = vec![0.0; p];
    for i in 0..n {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        root.apply(&z, &mut row);
        for (j, &v) in row.iter().enumerate() {
            x.col_mut(j)[i] = v;
        }
    }
    Ok(x)
}

pub fn gen_design<R: Rng + ?Sized>(spec: &CaseSpec, rng: &mut R) -> Result<Matrix<f64>> {
    match spec.covariance {
        Covariance::Ar1 { rho } => Ok(gen_ar1(spec.n, spec.p, rho, rng)),
        Covariance::Block { rho1, rho2, rho3 } => gen_block(spec.n, spec.p, spec.support.len(), rho1, rho2, rho3, rng),
    }
}

/// Raw design and response with noise standard deviation `noise_sd`.
pub fn gen_raw(spec: &CaseSpec, seed: u64, noise_sd: f64) -> Result<(Vec<f64>, Matrix<f64>)> {
    spec.validate()?;
    let x = gen_design(spec, &mut stream(seed, Stream::DataX, 0))?;
    let mut noise = stream(seed, Stream::DataNoise, 0);
    let y = (0..spec.n)
        .map(|i| {
            let signal: f64 = spec.support.iter().zip(&spec.beta).map(|(&j, &b)| b * x[(i, j)]).sum();
            let e: f64 = noise.sample(StandardNormal);
            signal + noise_sd * e
        })
        .collect();
    Ok((y, x))
}

/// Standardized simulated dataset and its true configuration.
pub fn gen_case(spec: &CaseSpec, seed: u64) -> Result<(Dataset<f64>, Configuration)> {
    let (y, x) = gen_raw(spec, seed, spec.sigma2.sqrt())?;
    Ok((standardize(&y, &x)?, spec.truth()))
}

// ---------------------------------------------------------------------------
// replications

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub case: String,
    pub method: String,
    /// Replications that produced a selection.
    pub completed: usize,
    pub failures: usize,
    pub prob_exact: f64,
    pub prob_exact_se: f64,
    pub prob_superset: f64,
    pub prob_superset_se: f64,
    pub avg_size: f64,
    pub avg_size_se: f64,
}

impl MetricsRow {
    pub fn from_selections(case: &str, method: &str, truth: &Configuration, selected: &[Option<Configuration>]) -> Self {
        let done: Vec<&Configuration> = selected.iter().flatten().collect();
        let m = done.len();
        let mf = m.max(1) as f64;
        let exact = done.iter().filter(|s| **s == truth).count() as f64 / mf;
        let superset = done.iter().filter(|s| s.is_superset_of(truth)).count() as f64 / mf;
        let sizes: Vec<f64> = done.iter().map(|s| s.size() as f64).collect();
        let mean = sizes.iter().sum::<f64>() / mf;
        let var = if m > 1 { sizes.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1) as f64 } else { 0.0 };
        let binom = |q: f64| (q * (1.0 - q) / mf).sqrt();
        MetricsRow {
            case: case.to_string(),
            method: method.to_string(),
            completed: m,
            failures: selected.len() - m,
            prob_exact: exact,
            prob_exact_se: binom(exact),
            prob_superset: superset,
            prob_superset_se: binom(superset),
            avg_size: mean,
            avg_size_se: (var / mf).sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSettings {
    pub reps: usize,
    pub seed: u64,
    pub tuning: TuningSettings,
    pub search: SearchSettings,
    /// Also report lasso and adaptive-lasso rows.
    pub baselines: bool,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        SimulationSettings { reps: 100, seed: 0, tuning: TuningSettings::default(), search: SearchSettings::default(), baselines: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub index: usize,
    pub seed: u64,
    pub selected: Option<Configuration>,
    pub lasso: Option<Configuration>,
    pub alasso: Option<Configuration>,
    pub lambda_hat: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub rows: Vec<MetricsRow>,
    pub replications: Vec<Replication>,
}

pub fn replication_seed(root: u64, index: usize) -> u64 {
    child_seed(root, Stream::Replication, index as u64)
}

fn run_replication(spec: &CaseSpec, settings: &SimulationSettings, index: usize) -> Replication {
    let seed = replication_seed(settings.seed, index);
    let mut rep = Replication { index, seed, selected: None, lasso: None, alasso: None, lambda_hat: None, error: None };
    let data = match gen_case(spec, seed) {
        Ok((d, _)) => d,
        Err(e) => {
            rep.error = Some(e.to_string());
            return rep;
        }
    };
    if settings.baselines {
        // comparison rows keep plain BIC
        let path = lasso_default(&data, PathCriterion::Bic);
        rep.lasso = Some(path.support(path.selected));
        rep.alasso = Some(adaptive_lasso(&data, PathCriterion::Bic).support);
    }
    match select(&data, &settings.tuning, &settings.search, seed) {
        Ok(sel) => {
            rep.lambda_hat = Some(sel.tuned.hyper.lambda);
            rep.selected = Some(sel.mpm);
        }
        Err(e) => rep.error = Some(e.to_string()),
    }
    rep
}

/// Generates, tunes, searches, and takes the median probability model in
/// each replication, in parallel, and summarizes against the truth.
pub fn run_case(spec: &CaseSpec, settings: &SimulationSettings) -> Result<CaseReport> {
    spec.validate()?;
    if settings.reps == 0 {
        return Err(EcapError::InvalidArgument("reps must be >= 1".into()));
    }
    let replications: Vec<Replication> = (0..settings.reps).into_par_iter().map(|r| run_replication(spec, settings, r)).collect();
    let truth = spec.truth();
    let column = |f: fn(&Replication) -> Option<Configuration>| replications.iter().map(f).collect::<Vec<_>>();
    let mut rows = vec![MetricsRow::from_selections(&spec.label, "ecap", &truth, &column(|r| r.selected.clone()))];
    if settings.baselines {
        rows.push(MetricsRow::from_selections(&spec.label, "lasso", &truth, &column(|r| r.lasso.clone())));
        rows.push(MetricsRow::from_selections(&spec.label, "adaptive-lasso", &truth, &column(|r| r.alasso.clone())));
    }
    Ok(CaseReport { rows, replications })
}

/// `λ̂` in each replication, tuning only. Failed replications give `None`.
pub fn lambda_hats(spec: &CaseSpec, reps: usize, seed: u64, tuning: &TuningSettings) -> Result<Vec<Option<f64>>> {
    spec.validate()?;
    Ok((0..reps)
        .into_par_iter()
        .map(|r| {
            let s = replication_seed(seed, r);
            let (data, _) = gen_case(spec, s).ok()?;
            tune(&data, tuning, s).ok().map(|t| t.hyper.lambda)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn case_coefficients() {
        let c1 = CaseSpec::case(1).unwrap();
        let expect1 = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95];
        assert!(c1.beta.iter().zip(expect1).all(|(a, b)| (a - b).abs() < 1e-12));
        assert_eq!(c1.support, vec![10, 11, 12, 13, 14, 30, 31, 32, 33, 34]);
        let c2 = CaseSpec::case(2).unwrap();
        let expect2 = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5];
        assert!(c2.beta.iter().zip(expect2).all(|(a, b)| (a - b).abs() < 1e-12));
        for id in 3..=5 {
            let c = CaseSpec::case(id).unwrap();
            assert_eq!(c.support, vec![0, 1, 2, 3, 4]);
        }
        assert!(CaseSpec::case(0).is_err() && CaseSpec::case(6).is_err());
    }

    #[test]
    fn block_psd_checks() {
        // case 3: det M = 2 * 371.5 - (0.5^2 * 5 * 495) = 124.25
        let m = reduced_matrix(500, 5, 0.25, 0.75, 0.5);
        assert!((m[0][0] * m[1][1] - m[0][1] * m[1][0] - 124.25).abs() < 1e-9);
        assert!(BlockRoot::new(500, 5, 0.25, 0.75, 0.5).is_ok());
        assert!(matches!(BlockRoot::new(500, 5, 0.1, 0.1, 0.9), Err(EcapError::NotPsd { .. })));
        assert!(matches!(BlockRoot::new(10, 5, 1.5, 0.1, 0.0), Err(EcapError::NotPsd { .. })));
    }

    #[test]
    fn block_root_squares_to_sigma() {
        let (p, s) = (7, 3);
        let (r1, r2, r3) = (0.6, 0.3, 0.2);
        let root = BlockRoot::new(p, s, r1, r2, r3).unwrap();
        let mut cols = Vec::new();
        for j in 0..p {
            let mut e = vec![0.0; p];
            e[j] = 1.0;
            let mut out = vec![0.0; p];
            root.apply(&e, &mut out);
            cols.push(out);
        }
        for a in 0..p {
            for b in 0..p {
                let got: f64 = (0..p).map(|k| cols[k][a] * cols[k][b]).sum();
                let want = if a == b {
                    1.0
                } else if a < s && b < s {
                    r1
                } else if a >= s && b >= s {
                    r2
                } else {
                    r3
                };
                assert!((got - want).abs() < 1e-12, "({a},{b}) {got} vs {want}");
            }
        }
    }

    #[test]
    fn ar1_lag_two_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = gen_ar1(20_000, 3, 0.8, &mut rng);
        assert!((corr(x.col(0), x.col(2)) - 0.64).abs() < 0.03);
    }

    #[test]
    fn noiseless_response_is_exact() {
        let spec = CaseSpec::case(4).unwrap();
        let (y, x) = gen_raw(&spec, 9, 0.0).unwrap();
        for i in 0..spec.n {
            let want: f64 = spec.support.iter().zip(&spec.beta).map(|(&j, &b)| b * x[(i, j)]).sum();
            assert_eq!(y[i], want);
        }
    }

    #[test]
    fn metrics_rows() {
        let truth = Configuration::new(vec![1, 2], 5).unwrap();
        let sel = vec![
            Some(truth.clone()),
            Some(Configuration::new(vec![1, 2, 3], 5).unwrap()),
            Some(Configuration::new(vec![1], 5).unwrap()),
            None,
        ];
        let row = MetricsRow::from_selections("t", "m", &truth, &sel);
        assert_eq!(row.completed, 3);
        assert_eq!(row.failures, 1);
        assert!((row.prob_exact - 1.0 / 3.0).abs() < 1e-12);
        assert!((row.prob_superset - 2.0 / 3.0).abs() < 1e-12);
        assert!((row.avg_size - 2.0).abs() < 1e-12);
        assert!((row.avg_size_se - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(row.prob_exact <= row.prob_superset);
    }
}

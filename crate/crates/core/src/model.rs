//! Per-configuration linear algebra: the Gram eigensystem of `X_S`, the
//! prior standardizing factor `k_S`, and the least-squares fit.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{EcapError, Result};
use crate::linalg::{dot, symmetric_eigen, Matrix};
use crate::scalar::{lit, log_sum_exp, Real};

/// Relative eigenvalue floor below which a Gram matrix counts as singular.
pub const SINGULAR_TOLERANCE: f64 = 1e-12;

/// A model: the sorted set of active predictor indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration(Vec<usize>);

impl Configuration {
    pub fn empty() -> Self {
        Configuration(Vec::new())
    }

    /// Sorts the indices; rejects duplicates and indices `>= p`.
    pub fn new(mut indices: Vec<usize>, p: usize) -> Result<Self> {
        indices.sort_unstable();
        if let Some(&bad) = indices.iter().find(|&&j| j >= p) {
            return Err(EcapError::IndexOutOfRange { index: bad, p });
        }
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(EcapError::InvalidArgument(format!("duplicate index in configuration {:?}", indices)));
        }
        Ok(Configuration(indices))
    }

    pub(crate) fn from_sorted(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Configuration(indices)
    }

    #[inline]
    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    pub fn is_superset_of(&self, other: &Configuration) -> bool {
        other.0.iter().all(|&j| self.contains(j))
    }

    pub fn with_added(&self, j: usize) -> Self {
        let mut v = self.0.clone();
        match v.binary_search(&j) {
            Ok(_) => {}
            Err(pos) => v.insert(pos, j),
        }
        Configuration(v)
    }

    pub fn with_removed(&self, j: usize) -> Self {
        Configuration(self.0.iter().copied().filter(|&i| i != j).collect())
    }

    pub fn with_swapped(&self, out: usize, into: usize) -> Self {
        self.with_removed(out).with_added(into)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, j) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", j)?;
        }
        write!(f, "}}")
    }
}

/// Eigensystem of `X_S^T X_S` (raw, not divided by `n`).
#[derive(Clone, Debug)]
pub struct GramEigen<T> {
    /// Eigenvalues, descending.
    pub d: Vec<T>,
    /// Orthonormal eigenvectors as columns.
    pub gamma: Matrix<T>,
    pub log_d: Vec<T>,
    /// `sum_i log d_i = log D(S)`.
    pub logdet: T,
    /// `d_max / d_min`.
    pub kappa: T,
    /// `sum_i 1 / d_i = tr{(X_S^T X_S)^{-1}}`.
    pub trace_inv: T,
}

impl<T: Real> GramEigen<T> {
    /// Eigensystem for the given column list, in the given order.
    pub fn from_columns(data: &Dataset<T>, cols: &[usize]) -> Result<Self> {
        if cols.is_empty() {
            return Err(EcapError::EmptyConfiguration);
        }
        let s = cols.len();
        let mut gram = Matrix::zeros(s, s);
        for a in 0..s {
            let ca = data.column(cols[a]);
            for b in 0..=a {
                let v = dot(ca, data.column(cols[b]));
                gram[(a, b)] = v;
                gram[(b, a)] = v;
            }
        }
        Self::from_gram(&gram)
    }

    pub fn from_gram(gram: &Matrix<T>) -> Result<Self> {
        let eig = symmetric_eigen(gram);
        let d_max = eig.values[0];
        let d_min = *eig.values.last().unwrap();
        if !(d_max > T::zero()) || !(d_min > lit::<T>(SINGULAR_TOLERANCE) * d_max) {
            return Err(EcapError::SingularGram {
                d_min: crate::scalar::to_f64(d_min),
                d_max: crate::scalar::to_f64(d_max),
            });
        }
        let log_d: Vec<T> = eig.values.iter().map(|v| v.ln()).collect();
        Ok(GramEigen {
            logdet: log_d.iter().copied().sum(),
            kappa: d_max / d_min,
            trace_inv: eig.values.iter().map(|&v| v.recip()).sum(),
            log_d,
            d: eig.values,
            gamma: eig.vectors,
        })
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.d.len()
    }

    /// `log sum_i d_i^lambda`, evaluated in log space.
    pub fn log_trace_power(&self, lambda: T) -> T {
        log_sum_exp(self.log_d.iter().map(|&l| lambda * l))
    }

    /// `log k_S(lambda)`.
    pub fn log_k(&self, lambda: T) -> T {
        self.trace_inv.ln() - self.log_trace_power(lambda)
    }
}

pub fn gram_eigen<T: Real>(data: &Dataset<T>, s: &Configuration) -> Result<GramEigen<T>> {
    GramEigen::from_columns(data, s.indices())
}

/// `k_S = tr{(X_S^T X_S)^{-1}} / tr{(X_S^T X_S)^lambda}`.
pub fn k_factor<T: Real>(ge: &GramEigen<T>, lambda: T) -> T {
    ge.log_k(lambda).exp()
}

#[derive(Clone, Debug)]
pub struct LeastSquaresFit<T> {
    pub beta_hat: Vec<T>,
    pub y_hat: Vec<T>,
    pub rss: T,
    /// `Gamma^T beta_hat`.
    pub theta: Vec<T>,
}

impl<T: Real> LeastSquaresFit<T> {
    pub fn residual(&self, y: &[T]) -> Vec<T> {
        y.iter().zip(&self.y_hat).map(|(&a, &b)| a - b).collect()
    }

    /// `sum_i d_i theta_i^2 = ||y_hat||^2`.
    pub fn explained(&self, ge: &GramEigen<T>) -> T {
        ge.d.iter().zip(&self.theta).map(|(&d, &t)| d * t * t).sum()
    }
}

/// Least-squares fit through the eigensystem: `theta = D^{-1} Gamma^T X_S^T y`,
/// `beta_hat = Gamma theta`.
pub fn least_squares<T: Real>(data: &Dataset<T>, s: &Configuration, ge: &GramEigen<T>) -> LeastSquaresFit<T> {
    least_squares_columns(data, s.indices(), ge)
}

pub fn least_squares_columns<T: Real>(data: &Dataset<T>, cols: &[usize], ge: &GramEigen<T>) -> LeastSquaresFit<T> {
    let size = cols.len();
    assert_eq!(size, ge.size(), "eigensystem does not match configuration");
    let xty: Vec<T> = cols.iter().map(|&j| dot(data.column(j), data.y())).collect();
    let theta: Vec<T> = (0..size).map(|i| dot(ge.gamma.col(i), &xty) / ge.d[i]).collect();
    let beta_hat = ge.gamma.matvec(&theta);
    let mut y_hat = vec![T::zero(); data.n()];
    for (&j, &b) in cols.iter().zip(&beta_hat) {
        for (yh, &x) in y_hat.iter_mut().zip(data.column(j)) {
            *yh = *yh + x * b;
        }
    }
    let rss = data.y().iter().zip(&y_hat).map(|(&a, &b)| (a - b) * (a - b)).sum();
    LeastSquaresFit { beta_hat, y_hat, rss, theta }
}

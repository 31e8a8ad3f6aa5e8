//! Response/design container and the standardization applied before analysis.
//!
//! Predictors are centered and scaled to unit sample standard deviation
//! (denominator `n - 1`); the response is centered only. The recorded
//! [`Standardization`] maps new observations into the same coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{EcapError, Result};
use crate::linalg::{norm_sq, Matrix};
use crate::scalar::{lit, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization<T> {
    pub x_mean: Vec<T>,
    pub x_scale: Vec<T>,
    pub y_mean: T,
}

impl<T: Real> Standardization<T> {
    pub fn identity(p: usize) -> Self {
        Standardization { x_mean: vec![T::zero(); p], x_scale: vec![T::one(); p], y_mean: T::zero() }
    }

    /// Maps raw predictor rows into the standardized coordinates.
    pub fn apply_x(&self, raw_x: &Matrix<T>) -> Result<Matrix<T>> {
        if raw_x.cols() != self.x_mean.len() {
            return Err(EcapError::DimensionMismatch(format!(
                "new data has {} columns, training data had {}",
                raw_x.cols(),
                self.x_mean.len()
            )));
        }
        Ok(Matrix::from_fn(raw_x.rows(), raw_x.cols(), |i, j| (raw_x[(i, j)] - self.x_mean[j]) / self.x_scale[j]))
    }
}

#[derive(Clone, Debug)]
pub struct Dataset<T> {
    y: Vec<T>,
    x: Matrix<T>,
    y_norm_sq: T,
    column_names: Option<Vec<String>>,
    scaling: Standardization<T>,
}

impl<T: Real> Dataset<T> {
    /// Wraps data that is already in analysis coordinates. Only dimensions
    /// are checked; the standardization record is the identity.
    pub fn from_parts(y: Vec<T>, x: Matrix<T>) -> Result<Self> {
        let n = y.len();
        if x.rows() != n {
            return Err(EcapError::DimensionMismatch(format!("y has {} rows, X has {}", n, x.rows())));
        }
        if n < 2 || x.cols() == 0 {
            return Err(EcapError::InvalidArgument(format!("need n >= 2 and p >= 1 (got n = {}, p = {})", n, x.cols())));
        }
        let p = x.cols();
        Ok(Dataset { y_norm_sq: norm_sq(&y), y, x, column_names: None, scaling: Standardization::identity(p) })
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(EcapError::DimensionMismatch(format!("{} column names for {} columns", names.len(), self.p())));
        }
        self.column_names = Some(names);
        Ok(self)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.y.len()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.x.cols()
    }

    #[inline]
    pub fn y(&self) -> &[T] {
        &self.y
    }

    #[inline]
    pub fn x(&self) -> &Matrix<T> {
        &self.x
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[T] {
        self.x.col(j)
    }

    #[inline]
    pub fn y_norm_sq(&self) -> T {
        self.y_norm_sq
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    pub fn scaling(&self) -> &Standardization<T> {
        &self.scaling
    }

    /// Default rank cap: a centered design has rank at most `n - 1`.
    pub fn default_rank_cap(&self) -> usize {
        (self.n() - 1).min(self.p())
    }
}

/// Centers `raw_y`, and centers and scales every column of `raw_x` to unit
/// sample standard deviation.
pub fn standardize<T: Real>(raw_y: &[T], raw_x: &Matrix<T>) -> Result<Dataset<T>> {
    let n = raw_y.len();
    if raw_x.rows() != n {
        return Err(EcapError::DimensionMismatch(format!("y has {} rows, X has {}", n, raw_x.rows())));
    }
    if n < 2 || raw_x.cols() == 0 {
        return Err(EcapError::InvalidArgument(format!("need n >= 2 and p >= 1 (got n = {}, p = {})", n, raw_x.cols())));
    }
    let nt: T = lit(n as f64);
    let p = raw_x.cols();
    let mut x = Matrix::zeros(n, p);
    let mut x_mean = Vec::with_capacity(p);
    let mut x_scale = Vec::with_capacity(p);
    for j in 0..p {
        let col = raw_x.col(j);
        let mean = col.iter().copied().sum::<T>() / nt;
        let max_abs = col.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let centered: Vec<T> = col.iter().map(|&v| v - mean).collect();
        // second pass removes the rounding left in the first mean
        let resid = centered.iter().copied().sum::<T>() / nt;
        let centered: Vec<T> = centered.into_iter().map(|v| v - resid).collect();
        let sd = (norm_sq(&centered) / lit(n as f64 - 1.0)).sqrt();
        if !(sd > lit::<T>(1e3) * T::epsilon() * max_abs.max(T::min_positive_value())) {
            return Err(EcapError::ZeroVarianceColumn(j));
        }
        for (dst, v) in x.col_mut(j).iter_mut().zip(centered) {
            *dst = v / sd;
        }
        x_mean.push(mean + resid);
        x_scale.push(sd);
    }
    let y_mean = raw_y.iter().copied().sum::<T>() / nt;
    let y: Vec<T> = raw_y.iter().map(|&v| v - y_mean).collect();
    Ok(Dataset {
        y_norm_sq: norm_sq(&y),
        y,
        x,
        column_names: None,
        scaling: Standardization { x_mean, x_scale, y_mean },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn centers_simple_column() {
        let x = Matrix::from_col_major(3, 1, vec![1.0, 2.0, 3.0]);
        let d = standardize(&[1.0, 1.0, 4.0], &x).unwrap();
        // centered (-1, 0, 1) has unit sample sd already
        assert_eq!(d.column(0), &[-1.0, 0.0, 1.0]);
        assert_eq!(d.y(), &[-1.0, -1.0, 2.0]);
        assert_eq!(d.scaling().x_mean, vec![2.0]);
    }

    #[test]
    fn standardizing_twice_is_a_no_op() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let raw = Matrix::from_fn(12, 4, |_, _| rng.random::<f64>() * 10.0 - 3.0);
        let y: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let once = standardize(&y, &raw).unwrap();
        let twice = standardize(once.y(), once.x()).unwrap();
        assert!(once.x().sub(twice.x()).max_abs() < 1e-12);
        for (a, b) in once.y().iter().zip(twice.y()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn random_columns_have_zero_mean_by_direct_summation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let raw = Matrix::from_fn(20, 5, |_, _| rng.random::<f64>() * 100.0 + 50.0);
        let y: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
        let d = standardize(&y, &raw).unwrap();
        for j in 0..5 {
            let mut s = 0.0;
            for i in 0..20 {
                s += d.x()[(i, j)];
            }
            assert!((s / 20.0).abs() < 1e-12, "column {j} mean {}", s / 20.0);
            let ss: f64 = d.column(j).iter().map(|v| v * v).sum();
            assert!((ss / 19.0 - 1.0).abs() < 1e-12);
        }
        assert!((d.y().iter().sum::<f64>() / 20.0).abs() < 1e-12);
    }

    #[test]
    fn constant_column_is_rejected() {
        let x = Matrix::from_col_major(3, 2, vec![1.0, 2.0, 3.0, 0.1, 0.1, 0.1]);
        assert_eq!(standardize(&[0.0, 1.0, 2.0], &x).unwrap_err(), EcapError::ZeroVarianceColumn(1));
    }

    #[test]
    fn new_rows_map_through_training_statistics() {
        let x = Matrix::from_col_major(4, 1, vec![1.0, 3.0, 5.0, 7.0]);
        let d = standardize(&[0.0, 0.0, 1.0, 1.0], &x).unwrap();
        let new = d.scaling().apply_x(&Matrix::from_col_major(1, 1, vec![4.0f64])).unwrap();
        assert!(new[(0, 0)].abs() < 1e-15);
        assert!(d.scaling().apply_x(&Matrix::<f64>::zeros(1, 2)).is_err());
    }
}

//! Conditional posterior of the coefficients of a selected configuration, and
//! prediction.
//!
//! With `V = g k_S (X_S^T X_S)^λ`, the posterior is
//! `N((X^T X + V^{-1})^{-1}(X^T y + φ V^{-1} β̂), σ² (X^T X + V^{-1})^{-1})`.
//! In the Gram eigenbasis `X^T X + V^{-1} = Γ diag(d_i + q_i) Γ^T` with
//! `q_i = d_i^{-λ} / (g k_S)`. The fractional power `α` does not enter.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Standardization};
use crate::error::{EcapError, Result};
use crate::linalg::Matrix;
use crate::marginal::Hyperparams;
use crate::model::{gram_eigen, least_squares, Configuration, GramEigen, LeastSquaresFit};
use crate::scalar::{lit, logistic_complement, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientPosterior<T> {
    pub config: Configuration,
    /// Posterior mean, one entry per index of `config` in ascending order.
    pub mean: Vec<T>,
    pub cov: Matrix<T>,
    pub hyper: Hyperparams<T>,
}

pub fn coefficient_posterior<T: Real>(
    s: &Configuration,
    ge: &GramEigen<T>,
    ls: &LeastSquaresFit<T>,
    h: &Hyperparams<T>,
) -> CoefficientPosterior<T> {
    let k = s.size();
    let log_k = ge.log_k(h.lambda);
    // w_i = d_i / (d_i + q_i), formed through log(q_i / d_i)
    let w: Vec<T> = ge
        .log_d
        .iter()
        .map(|&ld| logistic_complement(-(h.lambda + T::one()) * ld - h.g.ln() - log_k))
        .collect();
    let mean_eig: Vec<T> = ls.theta.iter().zip(&w).map(|(&th, &wi)| th * (wi + h.phi * (T::one() - wi))).collect();
    let var_eig: Vec<T> = w.iter().zip(&ge.d).map(|(&wi, &d)| h.sigma2 * wi / d).collect();
    let gamma = &ge.gamma;
    let mean = gamma.matvec(&mean_eig);
    let cov = Matrix::from_fn(k, k, |a, b| {
        let mut acc = T::zero();
        for i in 0..k {
            acc = acc + gamma[(a, i)] * var_eig[i] * gamma[(b, i)];
        }
        acc
    });
    // exact symmetry
    let cov = Matrix::from_fn(k, k, |a, b| lit::<T>(0.5) * (cov[(a, b)] + cov[(b, a)]));
    CoefficientPosterior { config: s.clone(), mean, cov, hyper: *h }
}

/// Posterior for `s` on `data`, building the eigensystem and fit.
pub fn posterior_for<T: Real>(data: &Dataset<T>, s: &Configuration, h: &Hyperparams<T>) -> Result<CoefficientPosterior<T>> {
    if s.is_empty() {
        return Err(EcapError::EmptyConfiguration);
    }
    let ge = gram_eigen(data, s)?;
    let ls = least_squares(data, s, &ge);
    Ok(coefficient_posterior(s, &ge, &ls, h))
}

/// Predictions on the standardized scale, without the response mean.
pub fn predict_standardized<T: Real>(post: &CoefficientPosterior<T>, x_std: &Matrix<T>) -> Vec<T> {
    let mut out = vec![T::zero(); x_std.rows()];
    for (&j, &b) in post.config.indices().iter().zip(&post.mean) {
        for (o, &v) in out.iter_mut().zip(x_std.col(j)) {
            *o = *o + v * b;
        }
    }
    out
}

/// Predicts responses for raw predictor rows using the training
/// standardization.
pub fn predict<T: Real>(post: &CoefficientPosterior<T>, x_new: &Matrix<T>, scaling: &Standardization<T>) -> Result<Vec<T>> {
    if let Some(&last) = post.config.indices().last() {
        if last >= x_new.cols() {
            return Err(EcapError::DimensionMismatch(format!(
                "model uses column {last} but the new design has {} columns",
                x_new.cols()
            )));
        }
    }
    let x_std = scaling.apply_x(x_new)?;
    Ok(predict_standardized(post, &x_std).into_iter().map(|v| v + scaling.y_mean).collect())
}

pub fn mspe<T: Real>(predictions: &[T], truth: &[T]) -> Result<T> {
    if predictions.len() != truth.len() {
        return Err(EcapError::DimensionMismatch(format!(
            "{} predictions for {} observations",
            predictions.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(EcapError::InvalidArgument("no observations to score".into()));
    }
    let sum = predictions.iter().zip(truth).fold(T::zero(), |acc, (&p, &t)| acc + (p - t) * (p - t));
    Ok(sum / lit::<T>(truth.len() as f64))
}

//! Bayesian variable selection for linear regression with a correlation-adaptive
//! conjugate prior.
//!
//! The prior on the coefficients of a configuration `S` has covariance
//! proportional to `(X_S^T X_S)^λ`, with a matching determinant factor in the
//! prior over configurations. `λ`, `g`, `φ` and `σ²` are estimated from the
//! data, configurations are explored by a screened shotgun stochastic search,
//! and the median probability model over the visited configurations is the
//! selection.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the
//! simulation harness and file I/O work in `f64`. Aliases for the common
//! instantiations are at the crate root.

pub mod data;
pub mod error;
pub mod inference;
pub mod io;
pub mod lasso;
pub mod linalg;
pub mod marginal;
pub mod model;
pub mod pipeline;
pub mod prior;
pub mod rng;
pub mod scalar;
pub mod search;
pub mod simulation;
pub mod tuning;

pub use data::{standardize, Dataset, Standardization};
pub use error::{EcapError, Result};
pub use inference::{coefficient_posterior, mspe, predict, CoefficientPosterior};
pub use lasso::{adaptive_lasso, lasso_default, screen_marginal, AdaptiveLassoFit, LassoPath, PathCriterion};
pub use linalg::Matrix;
pub use marginal::{log_marginal, score, GMode, Hyperparams, ScoredModel, Scorer};
pub use model::{gram_eigen, least_squares, Configuration, GramEigen, LeastSquaresFit};
pub use pipeline::{select, Selection};
pub use prior::PriorConfig;
pub use scalar::Real;
pub use search::{enumerate_exact, median_probability_model, run_search, SearchSettings, VisitedLedger};
pub use tuning::{tune, LambdaChoice, Tuned, TuningSettings};

pub type MatrixF64 = Matrix<f64>;
pub type MatrixF32 = Matrix<f32>;
pub type DatasetF64 = Dataset<f64>;
pub type DatasetF32 = Dataset<f32>;
pub type HyperparamsF64 = Hyperparams<f64>;
pub type HyperparamsF32 = Hyperparams<f32>;
pub type ScoredModelF64 = ScoredModel<f64>;
pub type ScoredModelF32 = ScoredModel<f32>;
pub type SelectionF64 = Selection<f64>;
pub type SelectionF32 = Selection<f32>;

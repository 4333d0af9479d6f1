//! Regression and pooling kernels: least squares (ordinary and weighted),
//! logistic regression by Newton/IRLS, posterior parameter draws for proper
//! multiple imputation, and Rubin's rules.

mod design;
mod linear;
mod logistic;
mod pooling;
mod posterior;
mod qr;

pub use design::DesignMatrix;
pub use linear::{ols_fit, wls_fit, LinearFit};
pub use logistic::{log_likelihood, logistic_fit, logistic_fit_with, score, LogisticFit, LogisticOptions};
pub use pooling::{rubins_pool, PooledEstimate};
pub use posterior::{cholesky_psd, posterior_draw, ParameterDraw, PosteriorDraw};
pub use qr::PivotedQr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("need more rows than columns ({rows} rows, {cols} columns)")]
    TooFewRows { rows: usize, cols: usize },
    #[error("design matrix is singular or ill-conditioned (condition estimate {condition:e})")]
    Singular { condition: f64 },
    #[error("weight {index} is not positive ({value})")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("response {index} is not 0/1 ({value})")]
    NonBinaryResponse { index: usize, value: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("logistic fit diverges along `{column}` (coefficient {coefficient:.3}): likely separation")]
    Separation { column: String, coefficient: f64 },
    #[error("logistic fit did not converge after {iterations} iterations (max |score| {gradient:e})")]
    NonConvergence { iterations: usize, gradient: f64 },
    #[error("Rubin's rules need at least 2 imputations, got {0}")]
    TooFewImputations(usize),
    #[error("negative within-imputation variance {0}")]
    NegativeVariance(f64),
}

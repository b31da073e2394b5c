//! Ridge-penalized regression solvers.
//!
//! All propensity-style fits in this crate go through here: binary
//! logistic and multinomial logit with a Gaussian (ridge) penalty on the
//! non-intercept coefficients, plus an ordinary least squares path used
//! by the ignorability diagnostics.
//!
//! The penalized objective is
//!
//! ```text
//!   sum_i w_i * nll_i(beta)  +  (lambda / 2) * ||beta_non-intercept||^2
//! ```
//!
//! minimized by damped Newton steps with step-halving until the
//! penalized-gradient max-norm drops below the tolerance (default 1e-8)
//! or the iteration cap (default 100) is reached. By default columns are
//! standardized internally (unweighted mean 0, population sd 1) so the
//! penalty acts on comparable scales; reported coefficients are mapped
//! back to the original scale. The default penalty corresponds to a
//! Gaussian prior with scale 2.5 on standardized columns.

use thiserror::Error;

mod design;
mod linalg;
mod logistic;
mod multinomial;
mod ols;

pub use design::{build_design, DesignMatrix};
pub use logistic::{fit_ridge_logistic, logistic_penalized_gradient, logistic_penalized_objective};
pub use multinomial::{
    fit_ridge_multinomial, multinomial_penalized_gradient, multinomial_penalized_objective,
};
pub use ols::{fit_ols, OlsFit};

pub(crate) use linalg::{cholesky, cholesky_inverse, cholesky_solve};

/// Default ridge strength: 1 / 2.5^2, a weakly informative Gaussian
/// prior scale of 2.5 on standardized columns.
pub const DEFAULT_RIDGE_LAMBDA: f64 = 1.0 / (2.5 * 2.5);

#[derive(Debug, Error)]
pub enum GlmError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("unknown variable '{0}'")]
    UnknownVariable(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("response must be coded 0/1 (found {0})")]
    NonBinaryResponse(f64),
    #[error("case weights must be nonnegative with a positive sum")]
    BadCaseWeights,
    #[error("ridge strength must be positive, got {0}")]
    BadLambda(f64),
    #[error("class {0} has zero observations; fit one-vs-rest logistic models per area instead")]
    EmptyClass(usize),
    #[error("design columns do not match the fitted model")]
    ColumnMismatch,
    #[error("normal equations are singular: {0}")]
    Singular(String),
}

/// Model family of a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Logistic,
    /// Multinomial logit over `K` classes with the last class pinned to
    /// zero coefficients.
    Multinomial(usize),
}

/// Per-column centering/scaling applied before penalization.
#[derive(Debug, Clone)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

/// Solver settings for the ridge fits.
#[derive(Debug, Clone)]
pub struct RidgeOptions {
    pub lambda: f64,
    pub standardize: bool,
    /// Convergence tolerance on the penalized-gradient max-norm.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RidgeOptions {
    fn default() -> Self {
        RidgeOptions {
            lambda: DEFAULT_RIDGE_LAMBDA,
            standardize: true,
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

impl RidgeOptions {
    pub fn with_lambda(lambda: f64) -> Self {
        RidgeOptions {
            lambda,
            ..Default::default()
        }
    }
}

/// A converged (or capped) penalized fit.
#[derive(Debug, Clone)]
pub struct GlmFit {
    pub family: Family,
    /// Original-scale coefficients, one vector per class (logistic fits
    /// have one; multinomial fits have K with the last all zeros).
    pub coefficients: Vec<Vec<f64>>,
    /// Solver-scale coefficients (standardized columns when
    /// `standardize` was set, otherwise identical to `coefficients`).
    pub std_coefficients: Vec<Vec<f64>>,
    pub standardization: Option<Standardization>,
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Penalized-gradient max-norm at the returned solution, measured on
    /// the solver scale.
    pub gradient_norm: f64,
    /// Penalized objective at each accepted iterate, starting from the
    /// initial point. Non-increasing by construction.
    pub objective_trace: Vec<f64>,
    pub labels: Vec<String>,
    pub case_weights: Option<Vec<f64>>,
}

impl GlmFit {
    fn check_columns(&self, x: &DesignMatrix) -> Result<(), GlmError> {
        if x.labels() != self.labels.as_slice() {
            return Err(GlmError::ColumnMismatch);
        }
        Ok(())
    }

    /// Fitted probabilities of a logistic model, strictly inside (0, 1).
    pub fn predict_prob(&self, x: &DesignMatrix) -> Result<Vec<f64>, GlmError> {
        if self.family != Family::Logistic {
            return Err(GlmError::Shape(
                "predict_prob requires a logistic fit".into(),
            ));
        }
        self.check_columns(x)?;
        let beta = &self.coefficients[0];
        Ok((0..x.n_rows())
            .map(|i| sigmoid(dot(x.row(i), beta)))
            .collect())
    }

    /// Per-class probabilities of a multinomial model; each row sums to
    /// one up to rounding.
    pub fn predict_class_probs(&self, x: &DesignMatrix) -> Result<Vec<Vec<f64>>, GlmError> {
        let k = match self.family {
            Family::Multinomial(k) => k,
            Family::Logistic => {
                return Err(GlmError::Shape(
                    "predict_class_probs requires a multinomial fit".into(),
                ))
            }
        };
        self.check_columns(x)?;
        let mut out = Vec::with_capacity(x.n_rows());
        for i in 0..x.n_rows() {
            let row = x.row(i);
            let etas: Vec<f64> = (0..k).map(|c| dot(row, &self.coefficients[c])).collect();
            out.push(softmax(&etas));
        }
        Ok(out)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax(etas: &[f64]) -> Vec<f64> {
    let max = etas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = etas.iter().map(|e| (e - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Validate case weights and return them (or a uniform default).
pub(crate) fn resolve_weights(
    n: usize,
    case_weights: Option<&[f64]>,
) -> Result<Vec<f64>, GlmError> {
    match case_weights {
        None => Ok(vec![1.0; n]),
        Some(w) => {
            if w.len() != n {
                return Err(GlmError::Shape("case weight length mismatch".into()));
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(GlmError::BadCaseWeights);
            }
            if !(w.iter().sum::<f64>() > 0.0) {
                return Err(GlmError::BadCaseWeights);
            }
            Ok(w.to_vec())
        }
    }
}

/// Map solver-scale coefficients back to the original column scale.
pub(crate) fn unstandardize(beta: &[f64], means: &[f64], scales: &[f64]) -> Vec<f64> {
    let mut out = beta.to_vec();
    let mut intercept_shift = 0.0;
    for j in 1..beta.len() {
        out[j] = beta[j] / scales[j];
        intercept_shift += beta[j] * means[j] / scales[j];
    }
    out[0] = beta[0] - intercept_shift;
    out
}

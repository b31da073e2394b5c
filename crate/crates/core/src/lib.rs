//! Small-area estimation from survey microdata.
//!
//! This crate estimates subpopulation (area-level) means from a national
//! survey by combining two weighting adjustments: a sampling adjustment
//! that reweights the sample toward the population, and a partial-pooling
//! adjustment that reweights respondents from *all* areas toward the
//! covariate profile of the target area. The second adjustment is driven
//! by a similarity ratio estimated from ridge-penalized area-membership
//! regressions, which lets the estimator exploit covariates that exist
//! only in the survey.
//!
//! Modules:
//!
//! - [`data`] — survey/population containers, CSV loaders, population
//!   cell shares, and overlap reporting.
//! - [`glm`] — ridge-penalized logistic and multinomial solvers plus the
//!   linear (OLS) path used by the diagnostics.
//! - [`estimators`] — direct and synthetic area estimators, weight
//!   construction, the direct/indirect decomposition, and standard errors.
//! - [`diagnostics`] — the per-area mean-independence regression with
//!   conventional and equivalence (TOST) tests.
//! - [`oracle`] — an enumerable synthetic-population testbed: exact
//!   area means, exact evaluation of the identification functional and
//!   its decomposition, sampling, and validation metrics.
//!
//! Per-area work and Monte Carlo replicates run on a rayon pool when the
//! default `parallel` feature is enabled; disabling it yields a fully
//! sequential build with identical results.

pub mod data;
pub mod diagnostics;
pub mod estimators;
pub mod glm;
pub mod oracle;
pub mod rng;

mod parallel;

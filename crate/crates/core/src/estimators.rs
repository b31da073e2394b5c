//! Direct and synthetic area estimators.
//!
//! The direct estimator for area `j` is the inverse-propensity-weighted
//! mean over respondents living in `j`; everyone else gets weight zero.
//! The synthetic estimator instead weights *every* respondent by the
//! product of three factors:
//!
//! ```text
//!   raw_ij = zeta_ij * p_ij * inv_prop_i
//! ```
//!
//! where `zeta_ij` is the ratio of two fitted area-membership
//! probabilities (with and without survey-only covariates), `p_ij` is
//! the population share of area `j` within the respondent's
//! population-covariate cell, and `inv_prop_i` is the inverse sampling
//! propensity (a supplied national weight, or a nonparametric cell-ratio
//! estimate). Weights are normalized to sum to one within each area, so
//! the marginal area probability cancels and never needs to be plugged
//! in.
//!
//! Standard errors use the fixed-weight linearization
//! `se^2 = sum_i w_i^2 (y_i - tau)^2`, optionally replaced by a
//! respondent-level bootstrap that refits the membership models on every
//! replicate.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::data::{
    population_area_shares, AreaShares, DataError, PopulationTable, SurveyDataset,
};
use crate::glm::{
    build_design, fit_ridge_logistic, fit_ridge_multinomial, GlmError, RidgeOptions,
    DEFAULT_RIDGE_LAMBDA,
};
use crate::parallel::par_map_range;
use crate::rng::stream_rng;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error("area '{0}' is not in the population table")]
    UnknownArea(String),
    #[error("area '{0}' has no survey respondents; the direct estimator is undefined")]
    NoAreaData(String),
    #[error("area '{0}' has no survey respondents; cannot fit an area-membership model")]
    AreaNotInSurvey(String),
    #[error("degenerate area '{0}': no respondent carries positive population share")]
    DegenerateArea(String),
    #[error(
        "population/survey mismatch: respondent {row} occupies cell ({cell}) with zero \
         population mass in every area"
    )]
    UnrepresentedCell { row: usize, cell: String },
    #[error("sampling propensities cannot be estimated when national weights are supplied")]
    WeightsAlreadySupplied,
    #[error("standard error undefined for a single observation")]
    SingleObservation,
    #[error("weights must be normalized to sum to 1 (got {0})")]
    UnnormalizedWeights(f64),
    #[error("input vectors have mismatched lengths")]
    LengthMismatch,
    #[error("weight trimming is incompatible with the direct/indirect decomposition")]
    TrimIncompatible,
}

/// How area-membership probabilities are fitted in the similarity step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    /// One ridge logistic fit per area (tolerates tiny areas, parallel).
    OneVsRest,
    /// A single multinomial logit over all areas.
    Multinomial,
}

/// Settings shared by the estimator entry points.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    pub lambda: f64,
    pub membership: Membership,
    /// Population covariates used in the membership fits (default: all).
    pub xp_vars: Option<Vec<String>>,
    /// Survey-only covariates used in the numerator fit (default: all).
    pub xs_vars: Option<Vec<String>>,
    /// Interaction terms (pairs/triples of variable names). Terms built
    /// purely from population covariates also enter the denominator fit.
    pub interactions: Vec<Vec<String>>,
    pub interval_level: f64,
    /// Bootstrap replicates for synthetic-estimator standard errors;
    /// zero keeps the fixed-weight linearization.
    pub bootstrap: usize,
    /// Optional cap on raw weights at this quantile (in (0,1]).
    pub trim_quantile: Option<f64>,
    /// Probability clip applied before ratio/odds computations.
    pub prob_clip: f64,
    pub seed: u64,
    /// Attach per-respondent weight vectors to the output.
    pub keep_weights: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            lambda: DEFAULT_RIDGE_LAMBDA,
            membership: Membership::OneVsRest,
            xp_vars: None,
            xs_vars: None,
            interactions: Vec::new(),
            interval_level: 0.90,
            bootstrap: 0,
            trim_quantile: None,
            prob_clip: 1e-12,
            seed: 0,
            keep_weights: false,
        }
    }
}

impl EstimatorConfig {
    fn ridge_options(&self) -> RidgeOptions {
        RidgeOptions::with_lambda(self.lambda)
    }

    fn xp_list(&self, survey: &SurveyDataset) -> Vec<String> {
        self.xp_vars.clone().unwrap_or_else(|| {
            survey
                .schema
                .population_vars
                .iter()
                .map(|v| v.name.clone())
                .collect()
        })
    }

    fn xs_list(&self, survey: &SurveyDataset) -> Vec<String> {
        self.xs_vars.clone().unwrap_or_else(|| {
            survey
                .schema
                .survey_vars
                .iter()
                .map(|v| v.name.clone())
                .collect()
        })
    }
}

/// Estimator label carried into the results CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Direct,
    Synthetic,
    SyntheticDecomposed,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Synthetic => "synthetic",
            Method::SyntheticDecomposed => "synthetic-decomposed",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Interval {
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Direct and indirect (partially pooled) contributions to a synthetic
/// estimate; they sum to the estimate exactly.
#[derive(Debug, Clone, Copy)]
pub struct Components {
    pub direct: f64,
    pub indirect: f64,
}

#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub area: String,
    pub estimate: f64,
    pub se: f64,
    pub interval: Interval,
    pub method: Method,
    /// Survey respondents living in the area.
    pub n_area: usize,
    /// Effective sample size 1 / sum(w^2) of the weights behind the
    /// estimate.
    pub ess: f64,
    pub components: Option<Components>,
}

/// Per-respondent weight factors for one target area.
#[derive(Debug, Clone)]
pub struct AreaWeights {
    pub area: String,
    pub zeta: Vec<f64>,
    pub p_pop: Vec<f64>,
    pub inv_prop: Vec<f64>,
    /// Normalized weights, summing to one.
    pub weights: Vec<f64>,
    pub ess: f64,
    pub max_weight_share: f64,
    /// Raw weights capped by the trim quantile, if any.
    pub trimmed: usize,
}

impl AreaWeights {
    /// Combine hand-supplied factors into normalized weights. The raw
    /// weight is the elementwise product `zeta * p_pop * inv_prop`,
    /// optionally capped at the `trim` quantile of the raw weights.
    pub fn from_factors(
        area: impl Into<String>,
        zeta: Vec<f64>,
        p_pop: Vec<f64>,
        inv_prop: Vec<f64>,
        trim: Option<f64>,
    ) -> Result<AreaWeights, EstimatorError> {
        let area = area.into();
        let n = zeta.len();
        if p_pop.len() != n || inv_prop.len() != n || n == 0 {
            return Err(EstimatorError::LengthMismatch);
        }
        let mut raw: Vec<f64> = (0..n).map(|i| zeta[i] * p_pop[i] * inv_prop[i]).collect();
        let mut trimmed = 0;
        if let Some(q) = trim {
            let cap = quantile(&raw, q);
            for r in raw.iter_mut() {
                if *r > cap {
                    *r = cap;
                    trimmed += 1;
                }
            }
        }
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(EstimatorError::DegenerateArea(area));
        }
        let weights: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
        let max_weight_share = weights.iter().cloned().fold(0.0f64, f64::max);
        Ok(AreaWeights {
            area,
            zeta,
            p_pop,
            inv_prop,
            weights,
            ess: 1.0 / sum_sq,
            max_weight_share,
            trimmed,
        })
    }

    /// CSV rendering: `respondent_id,zeta,p_pop,inv_prop,weight`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("respondent_id,zeta,p_pop,inv_prop,weight\n");
        for i in 0..self.weights.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                i + 1,
                self.zeta[i],
                self.p_pop[i],
                self.inv_prop[i],
                self.weights[i]
            );
        }
        out
    }
}

/// Empirical quantile with linear interpolation between order statistics.
fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = q.clamp(0.0, 1.0);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}

fn make_interval(estimate: f64, se: f64, level: f64) -> Interval {
    let z = normal_quantile(0.5 + level / 2.0);
    Interval {
        level,
        lower: estimate - z * se,
        upper: estimate + z * se,
    }
}

/// Fixed-weight linearization standard error of a normalized weighted
/// mean: `se^2 = sum_i w_i^2 (y_i - tau)^2`. Weights are treated as
/// fixed, and no n/(n-1) correction is applied (so a uniform-weight
/// binary outcome reproduces `sqrt(p(1-p)/n)` exactly).
pub fn weighted_mean_se(weights: &[f64], y: &[f64]) -> Result<f64, EstimatorError> {
    if weights.len() != y.len() {
        return Err(EstimatorError::LengthMismatch);
    }
    if weights.len() <= 1 {
        return Err(EstimatorError::SingleObservation);
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(EstimatorError::UnnormalizedWeights(total));
    }
    let tau: f64 = weights.iter().zip(y).map(|(w, v)| w * v).sum();
    let var: f64 = weights
        .iter()
        .zip(y)
        .map(|(w, v)| {
            let d = v - tau;
            w * w * d * d
        })
        .sum();
    Ok(var.sqrt())
}

/// Shared per-run context: area shares, per-row population share
/// vectors, per-row table area indices, and the inverse propensities.
struct Prep {
    shares: AreaShares,
    area_idx: Vec<usize>,
    /// Per-row `Pr(area | profile)` vectors in table area order.
    p_rows: Vec<Vec<f64>>,
    inv_prop: Vec<f64>,
}

fn prepare(survey: &SurveyDataset, table: &PopulationTable) -> Result<Prep, EstimatorError> {
    let shares = population_area_shares(table);
    let area_idx = survey.area_indices(table)?;
    let mut p_rows = Vec::with_capacity(survey.n());
    for row in 0..survey.n() {
        let profile = survey.xp_profile(row);
        match shares.shares.get(&profile) {
            Some(v) => p_rows.push(v.clone()),
            None => {
                return Err(EstimatorError::UnrepresentedCell {
                    row: row + 1,
                    cell: profile.describe(&survey.schema.population_vars),
                })
            }
        }
    }
    let inv_prop = match survey.national_weights() {
        Some(w) => w.to_vec(),
        None => estimate_sampling_propensity(survey, table)?,
    };
    Ok(Prep {
        shares,
        area_idx,
        p_rows,
        inv_prop,
    })
}

/// Nonparametric inverse sampling propensities from cell ratios: each
/// respondent's population cell share divided by its survey cell share.
/// When the survey carries national weights this step is skipped and the
/// weights are used directly; calling it anyway is an error.
pub fn estimate_sampling_propensity(
    survey: &SurveyDataset,
    table: &PopulationTable,
) -> Result<Vec<f64>, EstimatorError> {
    if survey.national_weights().is_some() {
        return Err(EstimatorError::WeightsAlreadySupplied);
    }
    let grand = table.total();
    let n = survey.n() as f64;
    let mut survey_counts: BTreeMap<crate::data::Profile, f64> = BTreeMap::new();
    for row in 0..survey.n() {
        *survey_counts.entry(survey.xp_profile(row)).or_insert(0.0) += 1.0;
    }
    let mut inv = Vec::with_capacity(survey.n());
    for row in 0..survey.n() {
        let profile = survey.xp_profile(row);
        let pop_total: f64 = (0..table.areas.len())
            .map(|j| table.count(&profile, j))
            .sum();
        if !(pop_total > 0.0) {
            return Err(EstimatorError::UnrepresentedCell {
                row: row + 1,
                cell: profile.describe(&survey.schema.population_vars),
            });
        }
        let pop_share = pop_total / grand;
        let survey_share = survey_counts[&profile] / n;
        inv.push(pop_share / survey_share);
    }
    Ok(inv)
}

/// Resolve the inverse-propensity vector: national weights when present,
/// otherwise the nonparametric cell-ratio estimate.
pub fn inverse_propensities(
    survey: &SurveyDataset,
    table: &PopulationTable,
) -> Result<Vec<f64>, EstimatorError> {
    match survey.national_weights() {
        Some(w) => Ok(w.to_vec()),
        None => estimate_sampling_propensity(survey, table),
    }
}

/// Direct estimator: inverse-propensity-weighted mean over respondents
/// in the target area; all other respondents receive weight zero.
pub fn direct_estimate(
    survey: &SurveyDataset,
    area: &str,
    inv_prop: &[f64],
    interval_level: f64,
) -> Result<EstimateResult, EstimatorError> {
    if inv_prop.len() != survey.n() {
        return Err(EstimatorError::LengthMismatch);
    }
    let n = survey.n();
    let in_area: Vec<bool> = (0..n).map(|i| survey.area_label(i) == area).collect();
    let n_area = in_area.iter().filter(|b| **b).count();
    if n_area == 0 {
        return Err(EstimatorError::NoAreaData(area.to_string()));
    }
    if n_area == 1 {
        return Err(EstimatorError::SingleObservation);
    }
    let total: f64 = (0..n).filter(|&i| in_area[i]).map(|i| inv_prop[i]).sum();
    let weights: Vec<f64> = (0..n)
        .map(|i| if in_area[i] { inv_prop[i] / total } else { 0.0 })
        .collect();
    let y = survey.outcomes();
    let estimate: f64 = weights.iter().zip(y).map(|(w, v)| w * v).sum();
    let se = weighted_mean_se(&weights, y)?;
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    Ok(EstimateResult {
        area: area.to_string(),
        estimate,
        se,
        interval: make_interval(estimate, se, interval_level),
        method: Method::Direct,
        n_area,
        ess: 1.0 / sum_sq,
        components: None,
    })
}

/// The similarity ratio and the two fitted membership probabilities it
/// was built from.
#[derive(Debug, Clone)]
pub struct ZetaEstimate {
    /// `zeta_i = numerator_i / denominator_i`, strictly positive.
    pub zeta: Vec<f64>,
    /// Fitted `Pr(area | population + survey covariates, sampled)`.
    pub numerator: Vec<f64>,
    /// Fitted `Pr(area | population covariates, sampled)`.
    pub denominator: Vec<f64>,
    /// Probabilities clipped away from 0/1 before the ratio.
    pub clip_events: usize,
    pub warnings: Vec<String>,
}

impl ZetaEstimate {
    fn ones(n: usize) -> Self {
        ZetaEstimate {
            zeta: vec![1.0; n],
            numerator: vec![1.0; n],
            denominator: vec![1.0; n],
            clip_events: 0,
            warnings: Vec::new(),
        }
    }
}

fn clip_prob(p: f64, clip: f64, events: &mut usize) -> f64 {
    if p < clip {
        *events += 1;
        clip
    } else if p > 1.0 - clip {
        *events += 1;
        1.0 - clip
    } else {
        p
    }
}

/// Split declared interactions into numerator terms (all of them) and
/// denominator terms (those built purely from population covariates).
fn split_interactions(
    survey: &SurveyDataset,
    interactions: &[Vec<String>],
) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let numerator = interactions.to_vec();
    let denominator = interactions
        .iter()
        .filter(|group| {
            group
                .iter()
                .all(|name| survey.schema.is_population_var(name))
        })
        .cloned()
        .collect();
    (numerator, denominator)
}

/// Estimate the similarity ratio for one target area from two ridge
/// logistic fits of area membership, evaluated in-sample.
///
/// With no survey-only covariates the numerator and denominator share
/// one fit configuration, so the ratio is exactly one. When every
/// respondent lives in the target area the membership probability is
/// identically one on both sides and the ratio is again exactly one.
pub fn estimate_zeta(
    survey: &SurveyDataset,
    area: &str,
    cfg: &EstimatorConfig,
) -> Result<ZetaEstimate, EstimatorError> {
    let n = survey.n();
    let y: Vec<f64> = (0..n)
        .map(|i| (survey.area_label(i) == area) as u8 as f64)
        .collect();
    let n_in = y.iter().filter(|v| **v == 1.0).count();
    if n_in == 0 {
        return Err(EstimatorError::AreaNotInSurvey(area.to_string()));
    }
    if n_in == n {
        return Ok(ZetaEstimate::ones(n));
    }

    let xp = cfg.xp_list(survey);
    let xs = cfg.xs_list(survey);
    let (num_inter, den_inter) = split_interactions(survey, &cfg.interactions);
    let mut num_vars = xp.clone();
    num_vars.extend(xs.iter().cloned());

    let den_design = build_design(survey, &xp, &den_inter)?;
    let num_design = build_design(survey, &num_vars, &num_inter)?;
    let opts = cfg.ridge_options();
    let mut warnings = Vec::new();

    let den_fit = fit_ridge_logistic(&den_design, &y, None, &opts)?;
    if !den_fit.converged {
        warnings.push(format!(
            "membership denominator fit for area '{area}' stopped at gradient norm {:.3e}",
            den_fit.gradient_norm
        ));
    }
    let den_probs = den_fit.predict_prob(&den_design)?;

    let (num_probs, num_converged) = if num_design.labels() == den_design.labels() {
        // identical configuration: reuse the fit so the ratio is exactly one
        (den_probs.clone(), den_fit.converged)
    } else {
        let num_fit = fit_ridge_logistic(&num_design, &y, None, &opts)?;
        let converged = num_fit.converged;
        (num_fit.predict_prob(&num_design)?, converged)
    };
    if !num_converged {
        warnings.push(format!(
            "membership numerator fit for area '{area}' did not reach tolerance"
        ));
    }

    let mut clip_events = 0;
    let zeta: Vec<f64> = num_probs
        .iter()
        .zip(&den_probs)
        .map(|(&q, &d)| {
            clip_prob(q, cfg.prob_clip, &mut clip_events)
                / clip_prob(d, cfg.prob_clip, &mut clip_events)
        })
        .collect();
    Ok(ZetaEstimate {
        zeta,
        numerator: num_probs,
        denominator: den_probs,
        clip_events,
        warnings,
    })
}

/// Build the synthetic weights for one area from the fitted factors,
/// looking population shares up from the table by each respondent's
/// population-covariate cell.
pub fn synthetic_weights(
    survey: &SurveyDataset,
    table: &PopulationTable,
    area: &str,
    zeta: &[f64],
    inv_prop: &[f64],
    trim: Option<f64>,
) -> Result<AreaWeights, EstimatorError> {
    let j = area_index(table, area)?;
    if zeta.len() != survey.n() || inv_prop.len() != survey.n() {
        return Err(EstimatorError::LengthMismatch);
    }
    let shares = population_area_shares(table);
    let mut p_pop = Vec::with_capacity(survey.n());
    for row in 0..survey.n() {
        let profile = survey.xp_profile(row);
        match shares.shares.get(&profile) {
            Some(v) => p_pop.push(v[j]),
            None => {
                return Err(EstimatorError::UnrepresentedCell {
                    row: row + 1,
                    cell: profile.describe(&survey.schema.population_vars),
                })
            }
        }
    }
    AreaWeights::from_factors(area, zeta.to_vec(), p_pop, inv_prop.to_vec(), trim)
}

/// One synthetic-estimate computation shared by the public entry points.
fn synthetic_for_area(
    survey: &SurveyDataset,
    prep: &Prep,
    area_j: usize,
    zeta: &ZetaEstimate,
    cfg: &EstimatorConfig,
    decompose: bool,
) -> Result<(EstimateResult, AreaWeights), EstimatorError> {
    let area = prep.shares.areas[area_j].clone();
    let n = survey.n();
    let p_pop: Vec<f64> = (0..n).map(|i| prep.p_rows[i][area_j]).collect();
    let weights = AreaWeights::from_factors(
        area.clone(),
        zeta.zeta.clone(),
        p_pop,
        prep.inv_prop.clone(),
        cfg.trim_quantile,
    )?;
    let y = survey.outcomes();
    let n_area = (0..n).filter(|&i| prep.area_idx[i] == area_j).count();

    let (estimate, components) = if decompose {
        if cfg.trim_quantile.is_some() {
            return Err(EstimatorError::TrimIncompatible);
        }
        // Same normalization constant as the plain weighted sum.
        let total: f64 = (0..n)
            .map(|i| zeta.zeta[i] * weights.p_pop[i] * prep.inv_prop[i])
            .sum();
        if !(total > 0.0) {
            return Err(EstimatorError::DegenerateArea(area));
        }
        let mut clip_events = 0;
        let mut direct_sum = 0.0;
        let mut indirect_sum = 0.0;
        for i in 0..n {
            let q = clip_prob(zeta.numerator[i], cfg.prob_clip, &mut clip_events);
            let d = clip_prob(zeta.denominator[i], cfg.prob_clip, &mut clip_events);
            // inverse of the implied target-area sampling propensity
            let kappa = weights.p_pop[i] * prep.inv_prop[i] / d;
            if prep.area_idx[i] == area_j {
                direct_sum += q * kappa * y[i];
            } else {
                let odds = q / (1.0 - q);
                indirect_sum += odds * (1.0 - q) * kappa * y[i];
            }
        }
        let direct = direct_sum / total;
        let indirect = indirect_sum / total;
        (direct + indirect, Some(Components { direct, indirect }))
    } else {
        let est: f64 = weights.weights.iter().zip(y).map(|(w, v)| w * v).sum();
        (est, None)
    };

    let se = weighted_mean_se(&weights.weights, y)?;
    let result = EstimateResult {
        area,
        estimate,
        se,
        interval: make_interval(estimate, se, cfg.interval_level),
        method: if components.is_some() {
            Method::SyntheticDecomposed
        } else {
            Method::Synthetic
        },
        n_area,
        ess: weights.ess,
        components,
    };
    Ok((result, weights))
}

fn area_index(table: &PopulationTable, area: &str) -> Result<usize, EstimatorError> {
    table
        .areas
        .iter()
        .position(|a| a == area)
        .ok_or_else(|| EstimatorError::UnknownArea(area.to_string()))
}

/// Synthetic area estimate for one target area.
pub fn synthetic_estimate(
    survey: &SurveyDataset,
    table: &PopulationTable,
    area: &str,
    cfg: &EstimatorConfig,
) -> Result<EstimateResult, EstimatorError> {
    let prep = prepare(survey, table)?;
    let j = area_index(table, area)?;
    let zeta = estimate_zeta(survey, area, cfg)?;
    let (result, _) = synthetic_for_area(survey, &prep, j, &zeta, cfg, false)?;
    Ok(result)
}

/// Synthetic estimate split into its direct (own-area) and indirect
/// (partially pooled) parts. The indirect part carries the odds factor
/// `q / (1 - q)` of the fitted membership probability; both parts share
/// the synthetic estimator's normalization constant, so they sum to the
/// estimate exactly and match the plain weighted sum up to rounding.
/// Membership probabilities are clipped to `[clip, 1 - clip]` before the
/// odds are formed; clipping events are counted and surfaced as warnings
/// by [`estimate_all_areas`].
pub fn decompose_estimate(
    survey: &SurveyDataset,
    table: &PopulationTable,
    area: &str,
    cfg: &EstimatorConfig,
) -> Result<EstimateResult, EstimatorError> {
    let prep = prepare(survey, table)?;
    let j = area_index(table, area)?;
    let zeta = estimate_zeta(survey, area, cfg)?;
    let (result, _) = synthetic_for_area(survey, &prep, j, &zeta, cfg, true)?;
    Ok(result)
}

/// Per-area outcome from [`estimate_all_areas`].
#[derive(Debug)]
pub struct AreaOutcome {
    pub area: String,
    pub direct: Result<EstimateResult, EstimatorError>,
    pub synthetic: Result<EstimateResult, EstimatorError>,
    pub weights: Option<AreaWeights>,
}

#[derive(Debug)]
pub struct AllAreas {
    /// One entry per population-table area, in table order.
    pub outcomes: Vec<AreaOutcome>,
    pub warnings: Vec<String>,
}

impl AllAreas {
    /// Results CSV with one row per successful estimate:
    /// `area,n_area,method,estimate,se,ci_lower,ci_upper,ess,direct_part,indirect_part`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(
            "area,n_area,method,estimate,se,ci_lower,ci_upper,ess,direct_part,indirect_part\n",
        );
        for outcome in &self.outcomes {
            for result in [&outcome.direct, &outcome.synthetic].into_iter().flatten() {
                let (dp, ip) = match &result.components {
                    Some(c) => (c.direct.to_string(), c.indirect.to_string()),
                    None => (String::new(), String::new()),
                };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    result.area,
                    result.n_area,
                    result.method.as_str(),
                    result.estimate,
                    result.se,
                    result.interval.lower,
                    result.interval.upper,
                    result.ess,
                    dp,
                    ip
                );
            }
        }
        out
    }
}

/// Membership similarity ratios for every area; `None` marks areas that
/// fell back to a constant ratio because they have no survey rows.
struct MembershipProbs {
    zetas: Vec<Option<ZetaEstimate>>,
    warnings: Vec<String>,
}

fn fit_membership_all(
    survey: &SurveyDataset,
    prep: &Prep,
    cfg: &EstimatorConfig,
) -> Result<MembershipProbs, EstimatorError> {
    let n_areas = prep.shares.areas.len();
    let mut warnings = Vec::new();

    if cfg.membership == Membership::Multinomial {
        match fit_membership_multinomial(survey, prep, cfg) {
            Ok(zetas) => {
                return Ok(MembershipProbs {
                    zetas: zetas.into_iter().map(Some).collect(),
                    warnings,
                })
            }
            Err(EstimatorError::Glm(GlmError::EmptyClass(class))) => {
                warnings.push(format!(
                    "multinomial membership fit failed (class {class} empty); \
                     falling back to one-vs-rest fits"
                ));
            }
            Err(other) => return Err(other),
        }
    }

    let per_area: Vec<Result<ZetaEstimate, EstimatorError>> =
        par_map_range(n_areas, |j| estimate_zeta(survey, &prep.shares.areas[j], cfg));
    let mut zetas = Vec::with_capacity(n_areas);
    for res in per_area {
        match res {
            Ok(z) => {
                warnings.extend(z.warnings.iter().cloned());
                zetas.push(Some(z));
            }
            Err(EstimatorError::AreaNotInSurvey(area)) => {
                warnings.push(format!(
                    "area '{area}' has no survey respondents; using similarity ratio 1 \
                     (population-share weighting only)"
                ));
                zetas.push(None);
            }
            Err(other) => return Err(other),
        }
    }
    Ok(MembershipProbs { zetas, warnings })
}

fn fit_membership_multinomial(
    survey: &SurveyDataset,
    prep: &Prep,
    cfg: &EstimatorConfig,
) -> Result<Vec<ZetaEstimate>, EstimatorError> {
    let n = survey.n();
    let k = prep.shares.areas.len();
    if k < 2 {
        // single-area table: membership probability is identically one
        return Ok(vec![ZetaEstimate::ones(n)]);
    }
    let xp = cfg.xp_list(survey);
    let xs = cfg.xs_list(survey);
    let (num_inter, den_inter) = split_interactions(survey, &cfg.interactions);
    let mut num_vars = xp.clone();
    num_vars.extend(xs.iter().cloned());
    let den_design = build_design(survey, &xp, &den_inter)?;
    let num_design = build_design(survey, &num_vars, &num_inter)?;
    let classes: Vec<usize> = prep.area_idx.clone();
    let opts = cfg.ridge_options();

    let den_fit = fit_ridge_multinomial(&den_design, &classes, k, None, &opts)?;
    let den_probs = den_fit.predict_class_probs(&den_design)?;
    let num_probs = if num_design.labels() == den_design.labels() {
        den_probs.clone()
    } else {
        let num_fit = fit_ridge_multinomial(&num_design, &classes, k, None, &opts)?;
        num_fit.predict_class_probs(&num_design)?
    };

    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let mut clip_events = 0;
        let numerator: Vec<f64> = (0..n).map(|i| num_probs[i][j]).collect();
        let denominator: Vec<f64> = (0..n).map(|i| den_probs[i][j]).collect();
        let zeta: Vec<f64> = (0..n)
            .map(|i| {
                clip_prob(numerator[i], cfg.prob_clip, &mut clip_events)
                    / clip_prob(denominator[i], cfg.prob_clip, &mut clip_events)
            })
            .collect();
        out.push(ZetaEstimate {
            zeta,
            numerator,
            denominator,
            clip_events,
            warnings: Vec::new(),
        });
    }
    Ok(out)
}

/// Estimate every area in the population table: the direct estimator
/// where the area has respondents, and the synthetic estimator (with its
/// decomposition whenever trimming is off) everywhere. Areas absent from
/// the survey fall back to a similarity ratio of one with a warning.
/// Per-area failures are recorded without aborting the remaining areas,
/// and the output order follows the population table regardless of
/// scheduling.
pub fn estimate_all_areas(
    survey: &SurveyDataset,
    table: &PopulationTable,
    cfg: &EstimatorConfig,
) -> Result<AllAreas, EstimatorError> {
    let prep = prepare(survey, table)?;
    let membership = fit_membership_all(survey, &prep, cfg)?;
    let mut warnings = membership.warnings;
    let n_areas = table.areas.len();

    type PerArea = (
        Result<EstimateResult, EstimatorError>,
        Result<EstimateResult, EstimatorError>,
        Option<AreaWeights>,
    );
    let results: Vec<PerArea> = par_map_range(n_areas, |j| {
        let area = &table.areas[j];
        let direct = direct_estimate(survey, area, &prep.inv_prop, cfg.interval_level);
        let decompose = cfg.trim_quantile.is_none() && membership.zetas[j].is_some();
        let fallback;
        let zeta = match &membership.zetas[j] {
            Some(z) => z,
            None => {
                fallback = ZetaEstimate::ones(survey.n());
                &fallback
            }
        };
        match synthetic_for_area(survey, &prep, j, zeta, cfg, decompose) {
            Ok((result, w)) => (direct, Ok(result), Some(w)),
            Err(e) => (direct, Err(e), None),
        }
    });

    let mut outcomes = Vec::with_capacity(n_areas);
    for (j, (direct, synthetic, weights)) in results.into_iter().enumerate() {
        let clips = membership.zetas[j]
            .as_ref()
            .map(|z| z.clip_events)
            .unwrap_or(0);
        if clips > 0 {
            warnings.push(format!(
                "area '{}': {clips} membership probabilities clipped away from 0/1",
                table.areas[j]
            ));
        }
        if let Some(w) = &weights {
            if w.trimmed > 0 {
                warnings.push(format!(
                    "area '{}': {} raw weights capped at the {} quantile",
                    table.areas[j],
                    w.trimmed,
                    cfg.trim_quantile.unwrap_or(1.0)
                ));
            }
        }
        outcomes.push(AreaOutcome {
            area: table.areas[j].clone(),
            direct,
            synthetic,
            weights: if cfg.keep_weights { weights } else { None },
        });
    }

    if cfg.bootstrap > 0 {
        bootstrap_synthetic_se(survey, table, cfg, &mut outcomes);
    }

    Ok(AllAreas { outcomes, warnings })
}

/// Respondent-level nonparametric bootstrap for the synthetic-estimator
/// standard errors. Every replicate resamples rows with replacement,
/// re-derives the inverse propensities, and refits the membership
/// models before recomputing the estimates. Replicate seeds derive from
/// the config seed and the replicate index only, so results do not
/// depend on thread count.
fn bootstrap_synthetic_se(
    survey: &SurveyDataset,
    table: &PopulationTable,
    cfg: &EstimatorConfig,
    outcomes: &mut [AreaOutcome],
) {
    let b = cfg.bootstrap;
    let n = survey.n();
    let n_areas = table.areas.len();
    let mut sub_cfg = cfg.clone();
    sub_cfg.bootstrap = 0;
    sub_cfg.keep_weights = false;

    let replicate_estimates: Vec<Vec<Option<f64>>> = par_map_range(b, |rep| {
        let mut rng = stream_rng(cfg.seed, &format!("bootstrap/{rep}"));
        let indices: Vec<usize> = (0..n)
            .map(|_| rand::Rng::random_range(&mut rng, 0..n))
            .collect();
        let resample = survey.subset(&indices);
        let mut ests = vec![None; n_areas];
        if let Ok(prep) = prepare(&resample, table) {
            if let Ok(membership) = fit_membership_all(&resample, &prep, &sub_cfg) {
                for (j, est) in ests.iter_mut().enumerate() {
                    let fallback;
                    let zeta = match &membership.zetas[j] {
                        Some(z) => z,
                        None => {
                            fallback = ZetaEstimate::ones(resample.n());
                            &fallback
                        }
                    };
                    if let Ok((r, _)) =
                        synthetic_for_area(&resample, &prep, j, zeta, &sub_cfg, false)
                    {
                        *est = Some(r.estimate);
                    }
                }
            }
        }
        ests
    });

    for (j, outcome) in outcomes.iter_mut().enumerate() {
        let draws: Vec<f64> = replicate_estimates
            .iter()
            .filter_map(|rep| rep[j])
            .collect();
        if draws.len() < 2 {
            continue;
        }
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var =
            draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        let se = var.sqrt();
        if let Ok(r) = outcome.synthetic.as_mut() {
            r.se = se;
            r.interval = make_interval(r.estimate, se, cfg.interval_level);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CovariateSchema, PopulationTable, Profile, SurveyDataset, VarDef};
    use std::collections::BTreeMap;

    /// survey with one binary population var and one binary survey var
    fn toy_survey(
        areas: &[&str],
        sex: &[u16],
        pid: &[u16],
        y: &[f64],
        weights: Option<Vec<f64>>,
    ) -> SurveyDataset {
        let schema = CovariateSchema::new(
            vec![VarDef::new("sex", &["m", "f"])],
            vec![VarDef::new("pid", &["d", "r"])],
            "y",
            "area",
        )
        .unwrap();
        let mut labels: Vec<String> = Vec::new();
        let mut idx = Vec::new();
        for a in areas {
            let pos = labels.iter().position(|l| l == a).unwrap_or_else(|| {
                labels.push(a.to_string());
                labels.len() - 1
            });
            idx.push(pos as u32);
        }
        SurveyDataset::from_parts(
            schema,
            y.to_vec(),
            labels,
            idx,
            vec![sex.to_vec()],
            vec![pid.to_vec()],
            weights,
        )
        .unwrap()
    }

    fn toy_table(cells: &[(u16, &[f64])], areas: &[&str]) -> PopulationTable {
        let mut map = BTreeMap::new();
        for (level, counts) in cells {
            map.insert(Profile(vec![*level]), counts.to_vec());
        }
        PopulationTable::from_cells(
            areas.iter().map(|s| s.to_string()).collect(),
            vec![VarDef::new("sex", &["m", "f"])],
            map,
        )
        .unwrap()
    }

    #[test]
    fn propensity_matches_hand_ratio() {
        // population shares (0.5, 0.5) over sex; survey shares (0.8, 0.2)
        let survey = toy_survey(
            &["A", "A", "A", "A", "A"],
            &[0, 0, 0, 0, 1],
            &[0, 0, 0, 0, 0],
            &[0.0, 0.0, 1.0, 1.0, 1.0],
            None,
        );
        let table = toy_table(&[(0, &[50.0]), (1, &[50.0])], &["A"]);
        let inv = estimate_sampling_propensity(&survey, &table).unwrap();
        assert!((inv[0] - 0.625).abs() < 1e-12);
        assert!((inv[4] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn matched_shares_give_constant_propensity() {
        let survey = toy_survey(
            &["A", "A", "A", "A"],
            &[0, 0, 1, 1],
            &[0, 0, 0, 0],
            &[0.0, 1.0, 0.0, 1.0],
            None,
        );
        let table = toy_table(&[(0, &[30.0]), (1, &[30.0])], &["A"]);
        let inv = estimate_sampling_propensity(&survey, &table).unwrap();
        assert!(inv.iter().all(|v| (v - inv[0]).abs() < 1e-12));
    }

    #[test]
    fn overrepresented_cell_halves_inverse_propensity() {
        // population: m 37.5% -> survey m share 75% = 2x, so 1/pi halves
        let survey = toy_survey(
            &["A", "A", "A", "A"],
            &[0, 0, 0, 1],
            &[0, 0, 0, 0],
            &[0.0, 1.0, 0.0, 1.0],
            None,
        );
        let table = toy_table(&[(0, &[37.5]), (1, &[62.5])], &["A"]);
        let inv = estimate_sampling_propensity(&survey, &table).unwrap();
        assert!((inv[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn propensity_estimation_refused_with_weights_present() {
        let survey = toy_survey(&["A", "A"], &[0, 1], &[0, 0], &[1.0, 0.0], Some(vec![1.0; 2]));
        let table = toy_table(&[(0, &[30.0]), (1, &[30.0])], &["A"]);
        assert!(matches!(
            estimate_sampling_propensity(&survey, &table),
            Err(EstimatorError::WeightsAlreadySupplied)
        ));
    }

    #[test]
    fn direct_estimate_matches_hand_values() {
        let survey = toy_survey(
            &["A", "A", "A", "A", "B"],
            &[0, 0, 1, 1, 0],
            &[0, 0, 0, 0, 0],
            &[1.0, 1.0, 0.0, 0.0, 1.0],
            Some(vec![1.0; 5]),
        );
        let r = direct_estimate(&survey, "A", &[1.0; 5], 0.95).unwrap();
        assert_eq!(r.n_area, 4);
        assert!((r.estimate - 0.5).abs() < 1e-15);
        assert!((r.se - 0.25).abs() < 1e-12);

        let survey2 = toy_survey(&["A", "A", "A"], &[0, 1, 0], &[0, 0, 1], &[1.0, 0.0, 1.0], None);
        let r2 = direct_estimate(&survey2, "A", &[3.0, 1.0, 0.0], 0.95).unwrap();
        // zero third weight: estimate from first two only
        assert!((r2.estimate - 0.75).abs() < 1e-15);
    }

    #[test]
    fn direct_estimate_requires_area_data() {
        let survey = toy_survey(&["A", "A"], &[0, 1], &[0, 0], &[1.0, 1.0], None);
        assert!(matches!(
            direct_estimate(&survey, "B", &[1.0, 1.0], 0.9),
            Err(EstimatorError::NoAreaData(_))
        ));
    }

    #[test]
    fn weighted_mean_se_hand_example() {
        let w = [0.5, 0.25, 0.25];
        let y = [1.0, 0.0, 1.0];
        let se = weighted_mean_se(&w, &y).unwrap();
        assert!((se * se - 0.0546875).abs() < 1e-12);
    }

    #[test]
    fn weighted_mean_se_uniform_matches_binomial_form() {
        let n = 50;
        let w = vec![1.0 / n as f64; n];
        let y: Vec<f64> = (0..n).map(|i| (i % 2 == 0) as u8 as f64).collect();
        let se = weighted_mean_se(&w, &y).unwrap();
        assert!((se - (0.25 / n as f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn weighted_mean_se_degenerate_single_weight() {
        let w = [1.0, 0.0, 0.0];
        let y = [0.7, 0.1, 0.9];
        assert_eq!(weighted_mean_se(&w, &y).unwrap(), 0.0);
    }

    #[test]
    fn weighted_mean_se_single_observation_undefined() {
        assert!(matches!(
            weighted_mean_se(&[1.0], &[0.5]),
            Err(EstimatorError::SingleObservation)
        ));
    }

    #[test]
    fn unnormalized_weights_rejected() {
        assert!(matches!(
            weighted_mean_se(&[0.4, 0.4], &[1.0, 0.0]),
            Err(EstimatorError::UnnormalizedWeights(_))
        ));
    }

    #[test]
    fn zeta_is_exactly_one_without_survey_vars() {
        let survey = toy_survey(
            &["A", "A", "B", "B", "A", "B"],
            &[0, 1, 0, 1, 0, 1],
            &[0, 1, 0, 1, 1, 0],
            &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
            None,
        );
        let cfg = EstimatorConfig {
            xs_vars: Some(vec![]),
            ..Default::default()
        };
        let z = estimate_zeta(&survey, "A", &cfg).unwrap();
        assert!(z.zeta.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn constant_survey_var_gives_zeta_one_within_tolerance() {
        let survey = toy_survey(
            &["A", "A", "B", "B", "A", "B"],
            &[0, 1, 0, 1, 0, 1],
            &[0, 0, 0, 0, 0, 0], // pid constant
            &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
            None,
        );
        let z = estimate_zeta(&survey, "A", &EstimatorConfig::default()).unwrap();
        for v in &z.zeta {
            assert!((v - 1.0).abs() < 1e-8, "zeta {v}");
        }
    }

    #[test]
    fn zeta_upweights_oversampled_survey_level() {
        // area A oversamples pid=r relative to area B
        let areas = ["A", "A", "A", "A", "B", "B", "B", "B"];
        let pid = [1u16, 1, 1, 0, 0, 0, 0, 1];
        let survey = toy_survey(
            &areas,
            &[0, 1, 0, 1, 0, 1, 0, 1],
            &pid,
            &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
            None,
        );
        let cfg = EstimatorConfig {
            xp_vars: Some(vec![]),
            ..Default::default()
        };
        let z = estimate_zeta(&survey, "A", &cfg).unwrap();
        for i in 0..8 {
            if pid[i] == 1 {
                assert!(z.zeta[i] > 1.0, "zeta[{i}] = {}", z.zeta[i]);
            } else {
                assert!(z.zeta[i] < 1.0, "zeta[{i}] = {}", z.zeta[i]);
            }
        }
    }

    #[test]
    fn missing_area_cannot_fit_membership() {
        let survey = toy_survey(&["A", "A"], &[0, 1], &[0, 1], &[1.0, 0.0], None);
        assert!(matches!(
            estimate_zeta(&survey, "B", &EstimatorConfig::default()),
            Err(EstimatorError::AreaNotInSurvey(_))
        ));
    }

    #[test]
    fn hand_set_factors_normalize_exactly() {
        // 6 respondents, hand-set factors, one zero population share
        let zeta = vec![1.2, 0.8, 1.0, 1.5, 0.5, 1.0];
        let p = vec![0.6, 0.4, 0.5, 0.3, 0.7, 0.0];
        let inv = vec![1.0, 2.0, 1.0, 0.5, 1.0, 3.0];
        let w =
            AreaWeights::from_factors("A", zeta.clone(), p.clone(), inv.clone(), None).unwrap();
        let raw: Vec<f64> = (0..6).map(|i| zeta[i] * p[i] * inv[i]).collect();
        let total: f64 = raw.iter().sum();
        for i in 0..6 {
            assert!((w.weights[i] - raw[i] / total).abs() < 1e-12);
        }
        assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(w.weights[5], 0.0);
        assert!(w.ess >= 1.0 && w.ess <= 6.0);
    }

    #[test]
    fn single_area_weights_proportional_to_inverse_propensity() {
        let survey = toy_survey(
            &["A", "A", "A"],
            &[0, 1, 0],
            &[0, 1, 1],
            &[1.0, 0.0, 1.0],
            Some(vec![2.0, 1.0, 3.0]),
        );
        let table = toy_table(&[(0, &[10.0]), (1, &[10.0])], &["A"]);
        let w = synthetic_weights(&survey, &table, "A", &[1.0; 3], &[2.0, 1.0, 3.0], None)
            .unwrap();
        assert!((w.weights[0] - 2.0 / 6.0).abs() < 1e-15);
        assert!((w.weights[1] - 1.0 / 6.0).abs() < 1e-15);
        assert!((w.weights[2] - 3.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn constant_outcome_is_reproduced_everywhere() {
        let survey = toy_survey(
            &["A", "B", "A", "B"],
            &[0, 0, 1, 1],
            &[0, 1, 0, 1],
            &[0.37, 0.37, 0.37, 0.37],
            Some(vec![1.0, 2.0, 1.5, 1.0]),
        );
        let table = toy_table(&[(0, &[10.0, 20.0]), (1, &[15.0, 5.0])], &["A", "B"]);
        for area in ["A", "B"] {
            let r =
                synthetic_estimate(&survey, &table, area, &EstimatorConfig::default()).unwrap();
            assert!((r.estimate - 0.37).abs() < 1e-12);
        }
    }

    #[test]
    fn decomposition_sums_to_estimate() {
        let survey = toy_survey(
            &["A", "B", "A", "B", "A", "B", "B", "A"],
            &[0, 0, 1, 1, 0, 1, 0, 1],
            &[0, 1, 0, 1, 1, 0, 0, 1],
            &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0],
            Some(vec![1.0, 1.2, 0.8, 1.0, 1.1, 0.9, 1.0, 1.0]),
        );
        let table = toy_table(&[(0, &[12.0, 18.0]), (1, &[20.0, 10.0])], &["A", "B"]);
        let cfg = EstimatorConfig::default();
        let plain = synthetic_estimate(&survey, &table, "A", &cfg).unwrap();
        let decomposed = decompose_estimate(&survey, &table, "A", &cfg).unwrap();
        let c = decomposed.components.unwrap();
        assert!((c.direct + c.indirect - decomposed.estimate).abs() < 1e-12);
        assert!((decomposed.estimate - plain.estimate).abs() < 1e-10);
    }

    #[test]
    fn all_in_area_makes_indirect_zero() {
        let survey = toy_survey(
            &["A", "A", "A", "A"],
            &[0, 1, 0, 1],
            &[0, 1, 1, 0],
            &[1.0, 0.0, 1.0, 1.0],
            Some(vec![1.0; 4]),
        );
        let table = toy_table(&[(0, &[10.0]), (1, &[10.0])], &["A"]);
        let r = decompose_estimate(&survey, &table, "A", &EstimatorConfig::default()).unwrap();
        let c = r.components.unwrap();
        assert_eq!(c.indirect, 0.0);
        assert!((c.direct - r.estimate).abs() < 1e-15);
    }

    #[test]
    fn single_area_table_reproduces_national_mean() {
        let weights = vec![2.0, 1.0, 1.0, 4.0];
        let y = vec![1.0, 0.0, 1.0, 0.0];
        let survey = toy_survey(
            &["A", "A", "A", "A"],
            &[0, 1, 0, 1],
            &[0, 1, 1, 0],
            &y,
            Some(weights.clone()),
        );
        let table = toy_table(&[(0, &[10.0]), (1, &[10.0])], &["A"]);
        let all = estimate_all_areas(&survey, &table, &EstimatorConfig::default()).unwrap();
        let est = all.outcomes[0].synthetic.as_ref().unwrap().estimate;
        let national: f64 = weights.iter().zip(&y).map(|(w, v)| w * v).sum::<f64>()
            / weights.iter().sum::<f64>();
        assert!((est - national).abs() < 1e-15);
        let dir = all.outcomes[0].direct.as_ref().unwrap().estimate;
        assert!((dir - est).abs() < 1e-15);
    }

    #[test]
    fn absent_area_estimated_with_warning() {
        let survey = toy_survey(
            &["A", "A", "A", "A"],
            &[0, 1, 0, 1],
            &[0, 1, 1, 0],
            &[1.0, 0.0, 1.0, 0.0],
            Some(vec![1.0; 4]),
        );
        let table = toy_table(&[(0, &[10.0, 10.0]), (1, &[10.0, 30.0])], &["A", "B"]);
        let all = estimate_all_areas(&survey, &table, &EstimatorConfig::default()).unwrap();
        assert!(all.outcomes[1].synthetic.is_ok());
        assert!(matches!(
            all.outcomes[1].direct,
            Err(EstimatorError::NoAreaData(_))
        ));
        assert!(all
            .warnings
            .iter()
            .any(|w| w.contains("no survey respondents")));
    }

    #[test]
    fn permuting_rows_leaves_estimates_unchanged() {
        let areas = ["A", "B", "A", "B", "A", "B", "A", "B", "A", "B"];
        let sex = [0u16, 1, 1, 0, 0, 1, 0, 0, 1, 1];
        let pid = [0u16, 1, 0, 1, 1, 0, 0, 1, 1, 0];
        let y = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let survey = toy_survey(&areas, &sex, &pid, &y, None);
        let table = toy_table(&[(0, &[25.0, 20.0]), (1, &[15.0, 40.0])], &["A", "B"]);
        let cfg = EstimatorConfig::default();
        let base = estimate_all_areas(&survey, &table, &cfg).unwrap();

        let perm = [7usize, 2, 9, 0, 4, 1, 8, 3, 6, 5];
        let areas_p: Vec<&str> = perm.iter().map(|&i| areas[i]).collect();
        let sex_p: Vec<u16> = perm.iter().map(|&i| sex[i]).collect();
        let pid_p: Vec<u16> = perm.iter().map(|&i| pid[i]).collect();
        let y_p: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let survey_p = toy_survey(&areas_p, &sex_p, &pid_p, &y_p, None);
        let permuted = estimate_all_areas(&survey_p, &table, &cfg).unwrap();
        for (a, b) in base.outcomes.iter().zip(&permuted.outcomes) {
            let ea = a.synthetic.as_ref().unwrap().estimate;
            let eb = b.synthetic.as_ref().unwrap().estimate;
            assert!((ea - eb).abs() < 1e-12, "{ea} vs {eb}");
        }
    }

    #[test]
    fn affine_outcome_transform_maps_estimates() {
        let areas = ["A", "B", "A", "B", "A", "B"];
        let sex = [0u16, 1, 1, 0, 0, 1];
        let pid = [0u16, 1, 0, 1, 1, 0];
        let w = vec![1.0, 2.0, 1.0, 1.0, 2.0, 1.0];
        let y = [1.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        let survey = toy_survey(&areas, &sex, &pid, &y, Some(w.clone()));
        let (a, b) = (2.5, -0.75);
        let y2: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        let survey2 = toy_survey(&areas, &sex, &pid, &y2, Some(w));
        let table = toy_table(&[(0, &[10.0, 15.0]), (1, &[20.0, 5.0])], &["A", "B"]);
        let cfg = EstimatorConfig::default();
        for area in ["A", "B"] {
            let r1 = synthetic_estimate(&survey, &table, area, &cfg).unwrap();
            let r2 = synthetic_estimate(&survey2, &table, area, &cfg).unwrap();
            assert!((r2.estimate - (a * r1.estimate + b)).abs() < 1e-12);
            let d1 = direct_estimate(&survey, area, &[1.0; 6], 0.9).unwrap();
            let d2 = direct_estimate(&survey2, area, &[1.0; 6], 0.9).unwrap();
            assert!((d2.estimate - (a * d1.estimate + b)).abs() < 1e-12);
        }
    }

    #[test]
    fn power_of_two_weight_scaling_is_bit_identical() {
        let areas = ["A", "B", "A", "B", "A", "B"];
        let sex = [0u16, 1, 1, 0, 0, 1];
        let pid = [0u16, 1, 0, 1, 1, 0];
        let y = [1.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        let w1 = vec![1.0, 2.0, 1.5, 1.0, 2.0, 1.0];
        let w2: Vec<f64> = w1.iter().map(|v| 4.0 * v).collect();
        let s1 = toy_survey(&areas, &sex, &pid, &y, Some(w1));
        let s2 = toy_survey(&areas, &sex, &pid, &y, Some(w2));
        let table = toy_table(&[(0, &[10.0, 15.0]), (1, &[20.0, 5.0])], &["A", "B"]);
        let cfg = EstimatorConfig::default();
        for area in ["A", "B"] {
            let r1 = synthetic_estimate(&s1, &table, area, &cfg).unwrap();
            let r2 = synthetic_estimate(&s2, &table, area, &cfg).unwrap();
            assert_eq!(r1.estimate.to_bits(), r2.estimate.to_bits());
        }
    }

    #[test]
    fn direct_weights_vanish_outside_target_area() {
        let survey = toy_survey(
            &["A", "B", "A", "B"],
            &[0, 1, 1, 0],
            &[0, 1, 0, 1],
            &[5.0, -3.0, 2.0, 7.0],
            None,
        );
        // huge inverse propensities outside A cannot influence the estimate
        let r = direct_estimate(&survey, "A", &[1.0, 100.0, 1.0, 100.0], 0.9).unwrap();
        assert!((r.estimate - 3.5).abs() < 1e-12);
    }

    #[test]
    fn trimming_caps_raw_weights_and_is_recorded() {
        let zeta = vec![1.0, 1.0, 1.0, 50.0];
        let p = vec![0.5; 4];
        let inv = vec![1.0; 4];
        let w = AreaWeights::from_factors("A", zeta, p, inv, Some(0.5)).unwrap();
        assert_eq!(w.trimmed, 1);
        assert!(w.max_weight_share < 0.5);
    }

    #[test]
    fn results_csv_has_expected_header_and_rows() {
        let survey = toy_survey(
            &["A", "B", "A", "B"],
            &[0, 1, 1, 0],
            &[0, 1, 0, 1],
            &[1.0, 0.0, 1.0, 0.0],
            Some(vec![1.0; 4]),
        );
        let table = toy_table(&[(0, &[10.0, 10.0]), (1, &[10.0, 10.0])], &["A", "B"]);
        let all = estimate_all_areas(&survey, &table, &EstimatorConfig::default()).unwrap();
        let csv = all.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "area,n_area,method,estimate,se,ci_lower,ci_upper,ess,direct_part,indirect_part"
        );
        // two methods per area, two areas
        assert_eq!(csv.lines().count(), 1 + 4);
    }
}

//! Testable-condition diagnostics for partial pooling.
//!
//! Pooling respondents across areas is justified when the outcome is
//! mean-independent of the area indicator given the covariates. That
//! condition is checked per area with an OLS regression of the outcome
//! on an intercept, the area indicator, and dummies for every declared
//! covariate. The coefficient on the indicator is reported with a
//! heteroskedasticity-robust (HC1) standard error by default — the
//! linear-probability regression on a binary outcome is heteroskedastic
//! by construction — and classical errors are available as a switch.
//!
//! Two tests accompany the point estimate. The conventional two-sided
//! t-test of a zero coefficient cannot by itself support pooling:
//! failing to reject zero is not evidence the effect is negligible. The
//! equivalence (TOST) test inverts the burden of proof — its null is
//! that the coefficient is at least `epsilon` in magnitude — so
//! rejection is affirmative evidence that any area effect is smaller
//! than the analyst's tolerance.
//!
//! No multiple-testing correction is applied across areas; the per-area
//! p-values are reported raw.

use std::fmt::Write as _;

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::data::SurveyDataset;
use crate::glm::{build_design, fit_ols, GlmError};
use crate::parallel::par_map;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error("area indicator for '{0}' is constant (all or no respondents in the area)")]
    ConstantIndicator(String),
    #[error("area indicator for '{0}' was dropped as collinear; effect not identifiable")]
    IndicatorNotIdentifiable(String),
    #[error("the panel needs at least two observed areas")]
    SingleArea,
    #[error("equivalence margin must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("alpha must lie in (0, 0.5), got {0}")]
    BadAlpha(f64),
    #[error("not enough residual degrees of freedom (n = {n}, rank = {rank})")]
    NoDegreesOfFreedom { n: usize, rank: usize },
}

/// Standard-error flavor for the test regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeKind {
    /// HC1 sandwich errors (default).
    Robust,
    /// Classical homoskedastic errors.
    Classical,
}

#[derive(Debug, Clone)]
pub struct DiagnosticsConfig {
    pub xp_vars: Option<Vec<String>>,
    pub xs_vars: Option<Vec<String>>,
    /// Equivalence margin; `None` skips the TOST and reports only the
    /// conventional test.
    pub epsilon: Option<f64>,
    pub alpha: f64,
    pub se_kind: SeKind,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            xp_vars: None,
            xs_vars: None,
            epsilon: None,
            alpha: 0.05,
            se_kind: SeKind::Robust,
        }
    }
}

/// Area-indicator coefficient with its standard error and residual
/// degrees of freedom.
#[derive(Debug, Clone)]
pub struct AreaRegression {
    pub delta_hat: f64,
    pub se: f64,
    pub df: f64,
    /// Labels of design columns dropped as collinear.
    pub dropped: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ConventionalTest {
    pub t: f64,
    pub p_value: f64,
    pub reject: bool,
}

#[derive(Debug, Clone)]
pub struct EquivalenceTest {
    pub epsilon: f64,
    /// Larger of the two one-sided p-values.
    pub p_value: f64,
    /// True when both one-sided nulls are rejected at `alpha`.
    pub reject: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct TostInterval {
    /// `1 - 2 alpha` display level.
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub struct IgnorabilityResult {
    pub area: String,
    pub delta_hat: f64,
    pub se: f64,
    pub df: f64,
    pub conventional: ConventionalTest,
    pub equivalence: Option<EquivalenceTest>,
    /// `delta_hat ± t_{1-alpha, df} * se`, the interval dual to the TOST.
    pub interval: TostInterval,
    pub dropped: Vec<String>,
}

fn t_cdf(x: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).unwrap().cdf(x)
}

fn t_quantile(p: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).unwrap().inverse_cdf(p)
}

/// OLS of the outcome on intercept, the `1{area == j}` indicator, and
/// dummies for the declared covariates. Returns the indicator
/// coefficient with robust (HC1) or classical standard errors.
/// Collinear covariate columns are dropped (they would make the
/// indicator effect unidentifiable); the indicator itself being dropped
/// or constant is an error.
pub fn area_ignorability_regression(
    survey: &SurveyDataset,
    area: &str,
    cfg: &DiagnosticsConfig,
) -> Result<AreaRegression, DiagnosticsError> {
    let n = survey.n();
    let indicator: Vec<f64> = (0..n)
        .map(|i| (survey.area_label(i) == area) as u8 as f64)
        .collect();
    let ones = indicator.iter().filter(|v| **v == 1.0).count();
    if ones == 0 || ones == n {
        return Err(DiagnosticsError::ConstantIndicator(area.to_string()));
    }

    let xp = cfg.xp_vars.clone().unwrap_or_else(|| {
        survey
            .schema
            .population_vars
            .iter()
            .map(|v| v.name.clone())
            .collect()
    });
    let xs = cfg.xs_vars.clone().unwrap_or_else(|| {
        survey
            .schema
            .survey_vars
            .iter()
            .map(|v| v.name.clone())
            .collect()
    });
    let mut vars = xp;
    vars.extend(xs);

    let base = build_design(survey, &vars, &[])?;
    let indicator_label = format!("area[{area}]");
    let design = base.with_inserted_column(1, indicator_label.clone(), &indicator)?;

    let fit = fit_ols(&design, survey.outcomes())?;
    if fit.dropped.iter().any(|l| l == &indicator_label) {
        return Err(DiagnosticsError::IndicatorNotIdentifiable(area.to_string()));
    }
    if fit.n <= fit.rank {
        return Err(DiagnosticsError::NoDegreesOfFreedom {
            n: fit.n,
            rank: fit.rank,
        });
    }
    // position of the indicator among kept columns (column index 1)
    let pos = fit
        .kept
        .iter()
        .position(|&j| j == 1)
        .expect("indicator survived dropping");

    let m = fit.rank;
    let df = (fit.n - fit.rank) as f64;
    let var = match cfg.se_kind {
        SeKind::Robust => {
            // HC1: inv * (X' diag(e^2) X) * inv, scaled by n / (n - k)
            let mut meat = vec![0.0; m * m];
            for i in 0..n {
                let row = design.row(i);
                let e2 = fit.residuals[i] * fit.residuals[i];
                for (a, &ka) in fit.kept.iter().enumerate() {
                    let ra = e2 * row[ka];
                    for (b, &kb) in fit.kept.iter().enumerate().skip(a) {
                        meat[a * m + b] += ra * row[kb];
                        let _ = b;
                    }
                }
            }
            for a in 0..m {
                for b in 0..a {
                    meat[a * m + b] = meat[b * m + a];
                }
            }
            // row `pos` of inv * meat * inv, entry `pos`
            let mut inv_meat = vec![0.0; m];
            for a in 0..m {
                let mut s = 0.0;
                for b in 0..m {
                    s += fit.xtx_inv[pos * m + b] * meat[b * m + a];
                }
                inv_meat[a] = s;
            }
            let sandwich: f64 = (0..m)
                .map(|a| inv_meat[a] * fit.xtx_inv[a * m + pos])
                .sum();
            sandwich * fit.n as f64 / df
        }
        SeKind::Classical => {
            let sse: f64 = fit.residuals.iter().map(|e| e * e).sum();
            (sse / df) * fit.xtx_inv[pos * m + pos]
        }
    };
    Ok(AreaRegression {
        delta_hat: fit.coefficients[1],
        se: var.sqrt(),
        df,
        dropped: fit.dropped,
    })
}

/// Two-sided t-test of a zero coefficient. Failing to reject is *not*
/// evidence of a negligible effect; pair it with the equivalence test.
pub fn conventional_test(delta_hat: f64, se: f64, df: f64, alpha: f64) -> ConventionalTest {
    if se == 0.0 {
        let reject = delta_hat != 0.0;
        return ConventionalTest {
            t: if reject { f64::INFINITY } else { 0.0 },
            p_value: if reject { 0.0 } else { 1.0 },
            reject,
        };
    }
    let t = delta_hat / se;
    let p_value = 2.0 * (1.0 - t_cdf(t.abs(), df));
    ConventionalTest {
        t,
        p_value,
        reject: p_value < alpha,
    }
}

/// Two one-sided t-tests of the null `|delta| >= epsilon`. Equivalence
/// is declared iff both one-sided nulls are rejected at `alpha`, which
/// happens exactly when the `1 - 2 alpha` interval lies strictly inside
/// `(-epsilon, epsilon)`. The reported p-value is the larger of the two
/// one-sided p-values.
pub fn equivalence_test(
    delta_hat: f64,
    se: f64,
    df: f64,
    epsilon: f64,
    alpha: f64,
) -> Result<EquivalenceTest, DiagnosticsError> {
    if !(epsilon > 0.0) {
        return Err(DiagnosticsError::BadEpsilon(epsilon));
    }
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(DiagnosticsError::BadAlpha(alpha));
    }
    if se == 0.0 {
        let inside = delta_hat.abs() < epsilon;
        return Ok(EquivalenceTest {
            epsilon,
            p_value: if inside { 0.0 } else { 1.0 },
            reject: inside,
        });
    }
    // delta <= -epsilon against delta > -epsilon, and delta >= epsilon
    // against delta < epsilon
    let t_lower = (delta_hat + epsilon) / se;
    let t_upper = (epsilon - delta_hat) / se;
    let p_lower = 1.0 - t_cdf(t_lower, df);
    let p_upper = 1.0 - t_cdf(t_upper, df);
    let p_value = p_lower.max(p_upper);
    Ok(EquivalenceTest {
        epsilon,
        p_value,
        reject: p_value < alpha,
    })
}

/// Panel of per-area ignorability results.
#[derive(Debug)]
pub struct IgnorabilityPanel {
    pub results: Vec<IgnorabilityResult>,
    /// Areas whose conventional test rejected at `alpha` (the
    /// conventional `1 - alpha` interval excludes zero).
    pub flagged: Vec<String>,
    /// Areas that could not be tested, with the reason.
    pub errors: Vec<(String, String)>,
}

impl IgnorabilityPanel {
    /// Plot-ready CSV:
    /// `area,delta,se,ci_lower,ci_upper,p_conventional,p_tost,flag`.
    /// The interval is the conventional `1 - alpha` confidence interval
    /// (the one the flag is based on); `p_tost` is empty when no margin
    /// was configured.
    pub fn to_csv_string(&self, alpha: f64) -> String {
        let mut out =
            String::from("area,delta,se,ci_lower,ci_upper,p_conventional,p_tost,flag\n");
        for r in &self.results {
            let tcrit = t_quantile(1.0 - alpha / 2.0, r.df);
            let p_tost = r
                .equivalence
                .as_ref()
                .map(|e| e.p_value.to_string())
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.area,
                r.delta_hat,
                r.se,
                r.delta_hat - tcrit * r.se,
                r.delta_hat + tcrit * r.se,
                r.conventional.p_value,
                p_tost,
                if self.flagged.contains(&r.area) { 1 } else { 0 }
            );
        }
        out
    }
}

/// Run the ignorability regression for every observed area. Per-area
/// failures are recorded and the panel continues; positive coefficients
/// mean the area's respondents outscore covariate-matched respondents
/// from elsewhere.
pub fn ignorability_panel(
    survey: &SurveyDataset,
    cfg: &DiagnosticsConfig,
) -> Result<IgnorabilityPanel, DiagnosticsError> {
    let mut areas: Vec<String> = survey.area_labels().to_vec();
    areas.sort();
    if areas.len() < 2 {
        return Err(DiagnosticsError::SingleArea);
    }
    if let Some(eps) = cfg.epsilon {
        if !(eps > 0.0) {
            return Err(DiagnosticsError::BadEpsilon(eps));
        }
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 0.5) {
        return Err(DiagnosticsError::BadAlpha(cfg.alpha));
    }

    let per_area: Vec<(String, Result<IgnorabilityResult, DiagnosticsError>)> =
        par_map(&areas, |area| {
            let outcome = area_ignorability_regression(survey, area, cfg).and_then(|reg| {
                let conventional =
                    conventional_test(reg.delta_hat, reg.se, reg.df, cfg.alpha);
                let equivalence = match cfg.epsilon {
                    Some(eps) => {
                        Some(equivalence_test(reg.delta_hat, reg.se, reg.df, eps, cfg.alpha)?)
                    }
                    None => None,
                };
                let tcrit = t_quantile(1.0 - cfg.alpha, reg.df);
                Ok(IgnorabilityResult {
                    area: area.clone(),
                    delta_hat: reg.delta_hat,
                    se: reg.se,
                    df: reg.df,
                    conventional,
                    equivalence,
                    interval: TostInterval {
                        level: 1.0 - 2.0 * cfg.alpha,
                        lower: reg.delta_hat - tcrit * reg.se,
                        upper: reg.delta_hat + tcrit * reg.se,
                    },
                    dropped: reg.dropped,
                })
            });
            (area.clone(), outcome)
        });

    let mut results = Vec::new();
    let mut flagged = Vec::new();
    let mut errors = Vec::new();
    for (area, outcome) in per_area {
        match outcome {
            Ok(r) => {
                if r.conventional.reject {
                    flagged.push(area);
                }
                results.push(r);
            }
            Err(e) => errors.push((area, e.to_string())),
        }
    }
    Ok(IgnorabilityPanel {
        results,
        flagged,
        errors,
    })
}

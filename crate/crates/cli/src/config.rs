//! Run configuration: one TOML file, every key overridable by a CLI
//! flag (flags win). All randomness derives from the single `seed`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sae_core::data::{CovariateSchema, VarDef};
use sae_core::estimators::{EstimatorConfig, Membership};
use sae_core::diagnostics::{DiagnosticsConfig, SeKind};
use sae_core::oracle::PopulationSpec;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 uses all available cores.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub paths: Paths,
    pub schema: Option<SchemaCfg>,
    #[serde(default)]
    pub estimator: EstimatorCfg,
    #[serde(default)]
    pub diagnostics: DiagCfg,
    pub simulation: Option<SimCfg>,
}

#[derive(Debug, Clone, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub survey: Option<PathBuf>,
    pub population: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaCfg {
    #[serde(default = "default_outcome")]
    pub outcome: String,
    #[serde(default = "default_area")]
    pub area: String,
    #[serde(default = "default_weight")]
    pub weight: String,
    pub variables: Vec<VarCfg>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct VarCfg {
    pub name: String,
    /// "P" for population covariates, "S" for survey-only.
    pub role: String,
    pub levels: Vec<String>,
}

fn default_outcome() -> String {
    "y".into()
}
fn default_area() -> String {
    "area".into()
}
fn default_weight() -> String {
    "weight".into()
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorCfg {
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// "one-vs-rest" or "multinomial".
    #[serde(default = "default_membership")]
    pub membership: String,
    #[serde(default = "default_level")]
    pub interval_level: f64,
    #[serde(default)]
    pub bootstrap: usize,
    pub trim_quantile: Option<f64>,
    #[serde(default)]
    pub interactions: Vec<Vec<String>>,
    pub xp_vars: Option<Vec<String>>,
    pub xs_vars: Option<Vec<String>>,
    #[serde(default)]
    pub emit_weights: bool,
}

fn default_lambda() -> f64 {
    sae_core::glm::DEFAULT_RIDGE_LAMBDA
}
fn default_membership() -> String {
    "one-vs-rest".into()
}
fn default_level() -> f64 {
    0.90
}

impl Default for EstimatorCfg {
    fn default() -> Self {
        EstimatorCfg {
            lambda: default_lambda(),
            membership: default_membership(),
            interval_level: default_level(),
            bootstrap: 0,
            trim_quantile: None,
            interactions: Vec::new(),
            xp_vars: None,
            xs_vars: None,
            emit_weights: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DiagCfg {
    pub epsilon: Option<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_true")]
    pub robust: bool,
}

fn default_alpha() -> f64 {
    0.05
}
fn default_true() -> bool {
    true
}

impl Default for DiagCfg {
    fn default() -> Self {
        DiagCfg {
            epsilon: None,
            alpha: default_alpha(),
            robust: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimCfg {
    /// Seed of the population build; the top-level `seed` drives
    /// sampling, so changing it alone leaves the truth fixed.
    #[serde(default = "default_pop_seed")]
    pub population_seed: u64,
    #[serde(default = "default_areas")]
    pub areas: usize,
    #[serde(default = "default_xp_levels")]
    pub xp_levels: Vec<usize>,
    #[serde(default = "default_xs_levels")]
    pub xs_levels: Vec<usize>,
    #[serde(default = "default_count_range")]
    pub count_range: [f64; 2],
    #[serde(default = "default_sampling_range")]
    pub sampling_range: [f64; 2],
    #[serde(default = "default_outcome_range")]
    pub outcome_range: [f64; 2],
    #[serde(default)]
    pub gamma_shift: f64,
    /// Zero-based index of the area receiving the outcome shift.
    #[serde(default)]
    pub shift_area: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Sample sizes for the consistency sweep; empty skips the sweep.
    #[serde(default)]
    pub n_sweep: Vec<usize>,
}

fn default_pop_seed() -> u64 {
    1
}
fn default_areas() -> usize {
    2
}
fn default_xp_levels() -> Vec<usize> {
    vec![2, 2]
}
fn default_xs_levels() -> Vec<usize> {
    vec![2]
}
fn default_count_range() -> [f64; 2] {
    [20.0, 120.0]
}
fn default_sampling_range() -> [f64; 2] {
    [0.05, 0.5]
}
fn default_outcome_range() -> [f64; 2] {
    [0.2, 0.8]
}
fn default_n() -> usize {
    5000
}
fn default_replicates() -> usize {
    50
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: RunConfig = toml::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.estimator.interval_level > 0.0 && self.estimator.interval_level < 1.0) {
            return Err(CliError::Config(format!(
                "interval_level must lie in (0, 1), got {}",
                self.estimator.interval_level
            )));
        }
        if !(self.estimator.lambda > 0.0) {
            return Err(CliError::Config(format!(
                "lambda must be positive, got {}",
                self.estimator.lambda
            )));
        }
        if let Some(q) = self.estimator.trim_quantile {
            if !(q > 0.0 && q <= 1.0) {
                return Err(CliError::Config(format!(
                    "trim_quantile must lie in (0, 1], got {q}"
                )));
            }
        }
        match self.estimator.membership.as_str() {
            "one-vs-rest" | "multinomial" => {}
            other => {
                return Err(CliError::Config(format!(
                    "membership must be 'one-vs-rest' or 'multinomial', got '{other}'"
                )))
            }
        }
        if !(self.diagnostics.alpha > 0.0 && self.diagnostics.alpha < 0.5) {
            return Err(CliError::Config(format!(
                "alpha must lie in (0, 0.5), got {}",
                self.diagnostics.alpha
            )));
        }
        if let Some(eps) = self.diagnostics.epsilon {
            if !(eps > 0.0) {
                return Err(CliError::Config(format!(
                    "epsilon must be positive, got {eps}"
                )));
            }
        }
        if let Some(schema) = &self.schema {
            for var in &schema.variables {
                if var.role != "P" && var.role != "S" {
                    return Err(CliError::Config(format!(
                        "variable '{}' has role '{}'; expected 'P' or 'S'",
                        var.name, var.role
                    )));
                }
            }
        }
        Ok(())
    }

    /// Materialize the covariate schema declared in the config.
    pub fn covariate_schema(&self) -> Result<CovariateSchema, CliError> {
        let schema = self
            .schema
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [schema] section".into()))?;
        let mut population = Vec::new();
        let mut survey_only = Vec::new();
        for var in &schema.variables {
            let def = VarDef {
                name: var.name.clone(),
                levels: var.levels.clone(),
            };
            match var.role.as_str() {
                "P" => population.push(def),
                _ => survey_only.push(def),
            }
        }
        let built = CovariateSchema::new(
            population,
            survey_only,
            schema.outcome.clone(),
            schema.area.clone(),
        )
        .map_err(|e| CliError::Config(e.to_string()))?
        .with_weight_name(schema.weight.clone());
        Ok(built)
    }

    pub fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            lambda: self.estimator.lambda,
            membership: if self.estimator.membership == "multinomial" {
                Membership::Multinomial
            } else {
                Membership::OneVsRest
            },
            xp_vars: self.estimator.xp_vars.clone(),
            xs_vars: self.estimator.xs_vars.clone(),
            interactions: self.estimator.interactions.clone(),
            interval_level: self.estimator.interval_level,
            bootstrap: self.estimator.bootstrap,
            trim_quantile: self.estimator.trim_quantile,
            prob_clip: 1e-12,
            seed: self.seed,
            keep_weights: self.estimator.emit_weights,
        }
    }

    pub fn diagnostics_config(&self) -> DiagnosticsConfig {
        DiagnosticsConfig {
            xp_vars: self.estimator.xp_vars.clone(),
            xs_vars: self.estimator.xs_vars.clone(),
            epsilon: self.diagnostics.epsilon,
            alpha: self.diagnostics.alpha,
            se_kind: if self.diagnostics.robust {
                SeKind::Robust
            } else {
                SeKind::Classical
            },
        }
    }

    pub fn population_spec(&self) -> Result<PopulationSpec, CliError> {
        let sim = self
            .simulation
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [simulation] section".into()))?;
        Ok(PopulationSpec {
            areas: sim.areas,
            xp_levels: sim.xp_levels.clone(),
            xs_levels: sim.xs_levels.clone(),
            count_range: (sim.count_range[0], sim.count_range[1]),
            sampling_range: (sim.sampling_range[0], sim.sampling_range[1]),
            outcome_range: (sim.outcome_range[0], sim.outcome_range[1]),
            gamma_shift: sim.gamma_shift,
            shift_area: sim.shift_area,
        })
    }

    /// Deterministic echo of the resolved configuration for the run log.
    pub fn echo(&self) -> String {
        toml::to_string_pretty(self).unwrap_or_else(|_| "<unserializable>".into())
    }
}

//! Survey and population data containers.
//!
//! Two kinds of covariates are distinguished throughout: *population*
//! covariates, whose joint distribution is known from a population table
//! (census-style cell counts), and *survey-only* covariates, observed for
//! respondents but not in the population. All covariates are categorical;
//! continuous variables must be binned upstream.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

/// Errors raised while building or loading datasets.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("schema error at data row {row}, column '{column}': unknown level '{value}'")]
    UnknownLevel {
        row: usize,
        column: String,
        value: String,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("parse error at data row {row}: {message}")]
    ParseRow { row: usize, message: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv { path: String, source: csv::Error },
}

/// One categorical variable: a name and its enumerated levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDef {
    pub name: String,
    pub levels: Vec<String>,
}

impl VarDef {
    pub fn new(name: impl Into<String>, levels: &[&str]) -> Self {
        VarDef {
            name: name.into(),
            levels: levels.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn level_index(&self, level: &str) -> Option<u16> {
        self.levels.iter().position(|l| l == level).map(|i| i as u16)
    }
}

/// Declares which columns a survey file carries and how they are typed.
///
/// `population_vars` are covariates whose joint distribution appears in
/// the population table; `survey_vars` exist only in the survey. The two
/// name sets must be disjoint and every variable needs at least one
/// level, with no duplicate levels inside a variable.
#[derive(Debug, Clone)]
pub struct CovariateSchema {
    pub population_vars: Vec<VarDef>,
    pub survey_vars: Vec<VarDef>,
    pub outcome_name: String,
    pub area_name: String,
    /// Header name of the optional per-respondent national weight column.
    pub weight_name: String,
}

impl CovariateSchema {
    pub fn new(
        population_vars: Vec<VarDef>,
        survey_vars: Vec<VarDef>,
        outcome_name: impl Into<String>,
        area_name: impl Into<String>,
    ) -> Result<Self, DataError> {
        let schema = CovariateSchema {
            population_vars,
            survey_vars,
            outcome_name: outcome_name.into(),
            area_name: area_name.into(),
            weight_name: "weight".to_string(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn with_weight_name(mut self, name: impl Into<String>) -> Self {
        self.weight_name = name.into();
        self
    }

    fn validate(&self) -> Result<(), DataError> {
        let mut seen = BTreeSet::new();
        for var in self.population_vars.iter().chain(&self.survey_vars) {
            if !seen.insert(var.name.clone()) {
                return Err(DataError::Schema(format!(
                    "variable '{}' declared more than once",
                    var.name
                )));
            }
            if var.levels.is_empty() {
                return Err(DataError::Schema(format!(
                    "variable '{}' has no levels",
                    var.name
                )));
            }
            let unique: BTreeSet<_> = var.levels.iter().collect();
            if unique.len() != var.levels.len() {
                return Err(DataError::Schema(format!(
                    "variable '{}' has duplicate levels",
                    var.name
                )));
            }
        }
        for reserved in [&self.outcome_name, &self.area_name, &self.weight_name] {
            if seen.contains(reserved) {
                return Err(DataError::Schema(format!(
                    "variable '{reserved}' collides with a reserved column name"
                )));
            }
        }
        Ok(())
    }

    /// Look up any declared variable (population or survey) by name.
    pub fn var(&self, name: &str) -> Option<&VarDef> {
        self.population_vars
            .iter()
            .chain(&self.survey_vars)
            .find(|v| v.name == name)
    }

    pub fn is_population_var(&self, name: &str) -> bool {
        self.population_vars.iter().any(|v| v.name == name)
    }
}

/// A joint level assignment over the population covariates, in schema
/// order. Used as the key for population cells.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Profile(pub Vec<u16>);

impl Profile {
    /// Human-readable rendering, e.g. `sex=f,age=18-34`.
    pub fn describe(&self, vars: &[VarDef]) -> String {
        let mut out = String::new();
        for (i, var) in vars.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let level = self
                .0
                .get(i)
                .and_then(|&ix| var.levels.get(ix as usize))
                .map(String::as_str)
                .unwrap_or("?");
            let _ = write!(out, "{}={}", var.name, level);
        }
        out
    }
}

/// Validated survey microdata. Columnar storage: one level-index vector
/// per covariate. Immutable after construction.
#[derive(Debug, Clone)]
pub struct SurveyDataset {
    pub schema: CovariateSchema,
    outcomes: Vec<f64>,
    /// Distinct observed area labels, in order of first appearance.
    area_labels: Vec<String>,
    /// Per-row index into `area_labels`.
    areas: Vec<u32>,
    /// `[population var][row]` level indices.
    xp: Vec<Vec<u16>>,
    /// `[survey var][row]` level indices.
    xs: Vec<Vec<u16>>,
    national_weights: Option<Vec<f64>>,
}

impl SurveyDataset {
    /// Assemble a dataset from columnar parts, enforcing the invariants:
    /// at least one row, aligned column lengths, level indices in range,
    /// and strictly positive weights when present.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        schema: CovariateSchema,
        outcomes: Vec<f64>,
        area_labels: Vec<String>,
        areas: Vec<u32>,
        xp: Vec<Vec<u16>>,
        xs: Vec<Vec<u16>>,
        national_weights: Option<Vec<f64>>,
    ) -> Result<Self, DataError> {
        let n = outcomes.len();
        if n == 0 {
            return Err(DataError::Validation("survey has no rows".into()));
        }
        if areas.len() != n {
            return Err(DataError::Validation("area column length mismatch".into()));
        }
        if xp.len() != schema.population_vars.len() || xs.len() != schema.survey_vars.len() {
            return Err(DataError::Validation(
                "covariate column count does not match schema".into(),
            ));
        }
        for (var, col) in schema.population_vars.iter().zip(&xp) {
            check_column(var, col, n)?;
        }
        for (var, col) in schema.survey_vars.iter().zip(&xs) {
            check_column(var, col, n)?;
        }
        if areas.iter().any(|&a| a as usize >= area_labels.len()) {
            return Err(DataError::Validation("area index out of range".into()));
        }
        if let Some(w) = &national_weights {
            if w.len() != n {
                return Err(DataError::Validation("weight column length mismatch".into()));
            }
            if let Some(i) = w.iter().position(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(DataError::Validation(format!(
                    "national weight at data row {} is not strictly positive",
                    i + 1
                )));
            }
        }
        Ok(SurveyDataset {
            schema,
            outcomes,
            area_labels,
            areas,
            xp,
            xs,
            national_weights,
        })
    }

    pub fn n(&self) -> usize {
        self.outcomes.len()
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn national_weights(&self) -> Option<&[f64]> {
        self.national_weights.as_deref()
    }

    /// Distinct observed area labels in order of first appearance.
    pub fn area_labels(&self) -> &[String] {
        &self.area_labels
    }

    pub fn area_label(&self, row: usize) -> &str {
        &self.area_labels[self.areas[row] as usize]
    }

    /// Level index of `var` (population or survey) at `row`.
    pub fn level(&self, var: &str, row: usize) -> Option<u16> {
        if let Some(ix) = self
            .schema
            .population_vars
            .iter()
            .position(|v| v.name == var)
        {
            return Some(self.xp[ix][row]);
        }
        self.schema
            .survey_vars
            .iter()
            .position(|v| v.name == var)
            .map(|ix| self.xs[ix][row])
    }

    /// Population-covariate profile of one respondent.
    pub fn xp_profile(&self, row: usize) -> Profile {
        Profile(self.xp.iter().map(|col| col[row]).collect())
    }

    /// Row-resampled copy (bootstrap support). Indices may repeat; the
    /// area label list is carried over unchanged.
    pub fn subset(&self, rows: &[usize]) -> SurveyDataset {
        SurveyDataset {
            schema: self.schema.clone(),
            outcomes: rows.iter().map(|&i| self.outcomes[i]).collect(),
            area_labels: self.area_labels.clone(),
            areas: rows.iter().map(|&i| self.areas[i]).collect(),
            xp: self
                .xp
                .iter()
                .map(|col| rows.iter().map(|&i| col[i]).collect())
                .collect(),
            xs: self
                .xs
                .iter()
                .map(|col| rows.iter().map(|&i| col[i]).collect())
                .collect(),
            national_weights: self
                .national_weights
                .as_ref()
                .map(|w| rows.iter().map(|&i| w[i]).collect()),
        }
    }

    /// Map each row's area label onto `table` area indices. Fails if the
    /// survey observes an area the population table does not contain.
    pub fn area_indices(&self, table: &PopulationTable) -> Result<Vec<usize>, DataError> {
        let lookup: BTreeMap<&str, usize> = table
            .areas
            .iter()
            .enumerate()
            .map(|(i, a)| (a.as_str(), i))
            .collect();
        let mut label_map = Vec::with_capacity(self.area_labels.len());
        for label in &self.area_labels {
            match lookup.get(label.as_str()) {
                Some(&i) => label_map.push(i),
                None => {
                    return Err(DataError::Validation(format!(
                        "survey area '{label}' does not appear in the population table"
                    )))
                }
            }
        }
        Ok(self.areas.iter().map(|&a| label_map[a as usize]).collect())
    }
}

fn check_column(var: &VarDef, col: &[u16], n: usize) -> Result<(), DataError> {
    if col.len() != n {
        return Err(DataError::Validation(format!(
            "column '{}' length mismatch",
            var.name
        )));
    }
    if let Some(i) = col.iter().position(|&ix| ix as usize >= var.levels.len()) {
        return Err(DataError::Validation(format!(
            "column '{}' has an out-of-range level index at data row {}",
            var.name,
            i + 1
        )));
    }
    Ok(())
}

/// Population cell counts over (population-covariate profile, area).
///
/// Counts are nonnegative reals so weighted census tallies load as-is.
/// Zero-count cells are retained; only a fully empty table is rejected.
#[derive(Debug, Clone)]
pub struct PopulationTable {
    /// Ordered area labels, in order of first appearance in the source.
    pub areas: Vec<String>,
    /// Population variable definitions, matching the schema.
    pub vars: Vec<VarDef>,
    /// Per-profile count vectors over `areas`; keys sorted for
    /// deterministic iteration.
    cells: BTreeMap<Profile, Vec<f64>>,
}

impl PopulationTable {
    pub fn from_cells(
        areas: Vec<String>,
        vars: Vec<VarDef>,
        cells: BTreeMap<Profile, Vec<f64>>,
    ) -> Result<Self, DataError> {
        let table = PopulationTable { areas, vars, cells };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<(), DataError> {
        if self.areas.is_empty() {
            return Err(DataError::Validation("population table has no areas".into()));
        }
        let n_areas = self.areas.len();
        for (profile, counts) in &self.cells {
            if counts.len() != n_areas {
                return Err(DataError::Validation(
                    "population cell vector length mismatch".into(),
                ));
            }
            if counts.iter().any(|&c| c < 0.0 || !c.is_finite()) {
                return Err(DataError::Validation(format!(
                    "negative or non-finite count for cell {}",
                    profile.describe(&self.vars)
                )));
            }
            if profile.0.len() != self.vars.len()
                || profile
                    .0
                    .iter()
                    .zip(&self.vars)
                    .any(|(&ix, v)| ix as usize >= v.levels.len())
            {
                return Err(DataError::Validation(
                    "population cell key does not match schema levels".into(),
                ));
            }
        }
        if !(self.total() > 0.0) {
            return Err(DataError::Validation(
                "population table has zero total count".into(),
            ));
        }
        let area_totals = self.area_totals();
        if let Some(j) = area_totals.iter().position(|&t| !(t > 0.0)) {
            return Err(DataError::Validation(format!(
                "area '{}' has zero total population count",
                self.areas[j]
            )));
        }
        Ok(())
    }

    pub fn cells(&self) -> &BTreeMap<Profile, Vec<f64>> {
        &self.cells
    }

    pub fn count(&self, profile: &Profile, area: usize) -> f64 {
        self.cells.get(profile).map_or(0.0, |v| v[area])
    }

    pub fn total(&self) -> f64 {
        self.cells.values().map(|v| v.iter().sum::<f64>()).sum()
    }

    pub fn area_totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.areas.len()];
        for counts in self.cells.values() {
            for (t, c) in totals.iter_mut().zip(counts) {
                *t += c;
            }
        }
        totals
    }

    /// Serialize back to the long CSV format (`area,count,<vars...>`).
    /// Cell counts round-trip exactly through `load_population`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("area,count");
        for var in &self.vars {
            out.push(',');
            out.push_str(&var.name);
        }
        out.push('\n');
        for (profile, counts) in &self.cells {
            for (j, area) in self.areas.iter().enumerate() {
                let _ = write!(out, "{},{}", area, counts[j]);
                for (ix, var) in profile.0.iter().zip(&self.vars) {
                    out.push(',');
                    out.push_str(&var.levels[*ix as usize]);
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Per-profile conditional area shares and the marginal area distribution.
#[derive(Debug, Clone)]
pub struct AreaShares {
    pub areas: Vec<String>,
    /// `profile -> Pr(area | profile)`; profiles with zero total count are
    /// flagged in `zero_profiles` instead of appearing here.
    pub shares: BTreeMap<Profile, Vec<f64>>,
    /// Marginal `Pr(area)` from the table totals.
    pub marginal: Vec<f64>,
    pub zero_profiles: Vec<Profile>,
}

/// Conditional probability of each area given a population-covariate
/// profile, computed nonparametrically from the table counts, plus the
/// marginal area distribution.
pub fn population_area_shares(table: &PopulationTable) -> AreaShares {
    let grand = table.total();
    let marginal = table
        .area_totals()
        .into_iter()
        .map(|t| t / grand)
        .collect();
    let mut shares = BTreeMap::new();
    let mut zero_profiles = Vec::new();
    for (profile, counts) in table.cells() {
        let total: f64 = counts.iter().sum();
        if total > 0.0 {
            shares.insert(profile.clone(), counts.iter().map(|c| c / total).collect());
        } else {
            zero_profiles.push(profile.clone());
        }
    }
    AreaShares {
        areas: table.areas.clone(),
        shares,
        marginal,
        zero_profiles,
    }
}

/// Support report comparing population cells against survey presence.
///
/// `missing_by_area` lists, per area, profiles that carry population mass
/// in that area but have no survey respondent there (a sampling-overlap
/// concern: some cells of the target population were never sampled).
/// `incomplete_profiles` lists, per population profile, the areas whose
/// sample contains no respondent with that profile (an area-overlap
/// concern: partial pooling for those areas has no support at that
/// profile).
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapReport {
    pub missing_by_area: Vec<(String, Vec<Profile>)>,
    pub incomplete_profiles: Vec<(Profile, Vec<String>)>,
    pub sampling_concern: bool,
    pub area_concern: bool,
}

impl OverlapReport {
    pub fn is_empty(&self) -> bool {
        self.missing_by_area.iter().all(|(_, v)| v.is_empty())
            && self.incomplete_profiles.is_empty()
    }
}

/// Compare survey support against population cells. Deterministic given
/// its inputs: areas in table order, profiles in sorted order.
pub fn check_overlap(
    survey: &SurveyDataset,
    table: &PopulationTable,
) -> Result<OverlapReport, DataError> {
    let pop_names: Vec<&str> = table.vars.iter().map(|v| v.name.as_str()).collect();
    let schema_names: Vec<&str> = survey
        .schema
        .population_vars
        .iter()
        .map(|v| v.name.as_str())
        .collect();
    if pop_names != schema_names {
        return Err(DataError::Schema(
            "survey and population table declare different population variables".into(),
        ));
    }
    let area_idx = survey.area_indices(table)?;
    let mut present: BTreeSet<(Profile, usize)> = BTreeSet::new();
    for row in 0..survey.n() {
        present.insert((survey.xp_profile(row), area_idx[row]));
    }

    let mut missing_by_area: Vec<(String, Vec<Profile>)> = table
        .areas
        .iter()
        .map(|a| (a.clone(), Vec::new()))
        .collect();
    let mut incomplete_profiles = Vec::new();
    for (profile, counts) in table.cells() {
        let mut absent_areas = Vec::new();
        for (j, area) in table.areas.iter().enumerate() {
            let sampled = present.contains(&(profile.clone(), j));
            if counts[j] > 0.0 && !sampled {
                missing_by_area[j].1.push(profile.clone());
            }
            if !sampled {
                absent_areas.push(area.clone());
            }
        }
        if !absent_areas.is_empty() {
            incomplete_profiles.push((profile.clone(), absent_areas));
        }
    }
    let sampling_concern = missing_by_area.iter().any(|(_, v)| !v.is_empty());
    let area_concern = !incomplete_profiles.is_empty();
    Ok(OverlapReport {
        missing_by_area,
        incomplete_profiles,
        sampling_concern,
        area_concern,
    })
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>, DataError> {
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn header_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

/// Load survey microdata from CSV. Expected header: `area`, the outcome
/// column, an optional weight column, and all declared covariates (any
/// column order). Row order is preserved.
pub fn load_survey(path: &Path, schema: &CovariateSchema) -> Result<SurveyDataset, DataError> {
    let mut reader = open_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|source| DataError::Csv {
            path: path.display().to_string(),
            source,
        })?
        .clone();

    let area_col = header_index(&headers, &schema.area_name).ok_or_else(|| {
        DataError::Parse(format!("missing area column '{}'", schema.area_name))
    })?;
    let outcome_col = header_index(&headers, &schema.outcome_name).ok_or_else(|| {
        DataError::Parse(format!("missing outcome column '{}'", schema.outcome_name))
    })?;
    let weight_col = header_index(&headers, &schema.weight_name);
    let var_cols: Vec<(usize, bool, usize)> = {
        // (column index, is population var, index within its group)
        let mut cols = Vec::new();
        for (i, var) in schema.population_vars.iter().enumerate() {
            let col = header_index(&headers, &var.name).ok_or_else(|| {
                DataError::Parse(format!("missing covariate column '{}'", var.name))
            })?;
            cols.push((col, true, i));
        }
        for (i, var) in schema.survey_vars.iter().enumerate() {
            let col = header_index(&headers, &var.name).ok_or_else(|| {
                DataError::Parse(format!("missing covariate column '{}'", var.name))
            })?;
            cols.push((col, false, i));
        }
        cols
    };

    let mut outcomes = Vec::new();
    let mut area_labels: Vec<String> = Vec::new();
    let mut area_map: BTreeMap<String, u32> = BTreeMap::new();
    let mut areas = Vec::new();
    let mut xp: Vec<Vec<u16>> = vec![Vec::new(); schema.population_vars.len()];
    let mut xs: Vec<Vec<u16>> = vec![Vec::new(); schema.survey_vars.len()];
    let mut weights = Vec::new();

    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|source| DataError::Csv {
            path: path.display().to_string(),
            source,
        })?;
        let area = record.get(area_col).unwrap_or("").to_string();
        if area.is_empty() {
            return Err(DataError::ParseRow {
                row,
                message: "empty area".into(),
            });
        }
        let outcome_raw = record.get(outcome_col).unwrap_or("");
        let outcome: f64 = outcome_raw.parse().map_err(|_| DataError::ParseRow {
            row,
            message: format!("outcome '{outcome_raw}' is not a number"),
        })?;
        if !outcome.is_finite() {
            return Err(DataError::ParseRow {
                row,
                message: "outcome is not finite".into(),
            });
        }
        if let Some(wc) = weight_col {
            let raw = record.get(wc).unwrap_or("");
            let w: f64 = raw.parse().map_err(|_| DataError::ParseRow {
                row,
                message: format!("weight '{raw}' is not a number"),
            })?;
            if !(w > 0.0) || !w.is_finite() {
                return Err(DataError::Validation(format!(
                    "weight at data row {row} must be strictly positive, got {raw}"
                )));
            }
            weights.push(w);
        }
        let next_id = area_map.len() as u32;
        let id = *area_map.entry(area.clone()).or_insert(next_id);
        if id == next_id {
            area_labels.push(area);
        }
        areas.push(id);
        outcomes.push(outcome);
        for &(col, is_pop, k) in &var_cols {
            let raw = record.get(col).unwrap_or("");
            let var = if is_pop {
                &schema.population_vars[k]
            } else {
                &schema.survey_vars[k]
            };
            let ix = var.level_index(raw).ok_or_else(|| DataError::UnknownLevel {
                row,
                column: var.name.clone(),
                value: raw.to_string(),
            })?;
            if is_pop {
                xp[k].push(ix);
            } else {
                xs[k].push(ix);
            }
        }
    }

    SurveyDataset::from_parts(
        schema.clone(),
        outcomes,
        area_labels,
        areas,
        xp,
        xs,
        weight_col.map(|_| weights),
    )
}

/// Load a long-format population table from CSV (`area`, `count`, then
/// one column per population covariate). Duplicate (profile, area) rows
/// are summed; cells absent from the file default to zero.
pub fn load_population(
    path: &Path,
    schema: &CovariateSchema,
) -> Result<PopulationTable, DataError> {
    let mut reader = open_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|source| DataError::Csv {
            path: path.display().to_string(),
            source,
        })?
        .clone();
    let area_col = header_index(&headers, "area")
        .ok_or_else(|| DataError::Parse("missing area column 'area'".into()))?;
    let count_col = header_index(&headers, "count")
        .ok_or_else(|| DataError::Parse("missing count column 'count'".into()))?;
    let mut var_cols = Vec::new();
    for var in &schema.population_vars {
        let col = header_index(&headers, &var.name).ok_or_else(|| {
            DataError::Parse(format!("missing covariate column '{}'", var.name))
        })?;
        var_cols.push(col);
    }

    let mut areas: Vec<String> = Vec::new();
    let mut area_map: BTreeMap<String, usize> = BTreeMap::new();
    let mut raw_cells: Vec<(Profile, usize, f64)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|source| DataError::Csv {
            path: path.display().to_string(),
            source,
        })?;
        let area = record.get(area_col).unwrap_or("").to_string();
        if area.is_empty() {
            return Err(DataError::ParseRow {
                row,
                message: "empty area".into(),
            });
        }
        let raw = record.get(count_col).unwrap_or("");
        let count: f64 = raw.parse().map_err(|_| DataError::ParseRow {
            row,
            message: format!("count '{raw}' is not a number"),
        })?;
        if count < 0.0 || !count.is_finite() {
            return Err(DataError::Validation(format!(
                "negative or non-finite count at data row {row}"
            )));
        }
        let mut key = Vec::with_capacity(var_cols.len());
        for (&col, var) in var_cols.iter().zip(&schema.population_vars) {
            let raw = record.get(col).unwrap_or("");
            let ix = var.level_index(raw).ok_or_else(|| DataError::UnknownLevel {
                row,
                column: var.name.clone(),
                value: raw.to_string(),
            })?;
            key.push(ix);
        }
        let next = area_map.len();
        let j = *area_map.entry(area.clone()).or_insert(next);
        if j == next {
            areas.push(area);
        }
        raw_cells.push((Profile(key), j, count));
    }
    if raw_cells.is_empty() {
        return Err(DataError::Validation(
            "population table has zero total count".into(),
        ));
    }
    let n_areas = areas.len();
    let mut cells: BTreeMap<Profile, Vec<f64>> = BTreeMap::new();
    for (profile, j, count) in raw_cells {
        cells.entry(profile).or_insert_with(|| vec![0.0; n_areas])[j] += count;
    }
    PopulationTable::from_cells(areas, schema.population_vars.clone(), cells)
}

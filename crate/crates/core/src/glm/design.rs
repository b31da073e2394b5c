//! Design-matrix construction from categorical survey data.

use crate::data::SurveyDataset;

use super::GlmError;

/// Dense row-major design matrix with an intercept in column 0 and
/// labeled dummy/interaction columns after it.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    labels: Vec<String>,
    data: Vec<f64>,
    n: usize,
    p: usize,
}

impl DesignMatrix {
    /// Wrap raw row-major data. Column 0 must be an all-ones intercept
    /// and labels must be unique.
    pub fn from_raw(labels: Vec<String>, data: Vec<f64>, n: usize) -> Result<Self, GlmError> {
        let p = labels.len();
        if p == 0 || data.len() != n * p {
            return Err(GlmError::Shape("design data does not match labels".into()));
        }
        for i in 0..n {
            if data[i * p] != 1.0 {
                return Err(GlmError::Shape("intercept column must be all ones".into()));
            }
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(GlmError::Shape(format!("duplicate column label '{l}'")));
            }
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(GlmError::NonFinite("design matrix".into()));
        }
        Ok(DesignMatrix { labels, data, n, p })
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.p
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.p + j]
    }

    /// Insert a column at position `at` (used by the diagnostics to slot
    /// an area indicator right after the intercept).
    pub fn with_inserted_column(
        &self,
        at: usize,
        label: impl Into<String>,
        values: &[f64],
    ) -> Result<Self, GlmError> {
        if values.len() != self.n || at == 0 || at > self.p {
            return Err(GlmError::Shape("bad column insertion".into()));
        }
        let label = label.into();
        let mut labels = self.labels.clone();
        labels.insert(at, label);
        let p = self.p + 1;
        let mut data = Vec::with_capacity(self.n * p);
        for i in 0..self.n {
            let row = self.row(i);
            data.extend_from_slice(&row[..at]);
            data.push(values[i]);
            data.extend_from_slice(&row[at..]);
        }
        DesignMatrix::from_raw(labels, data, self.n)
    }

    /// Column means and population standard deviations (intercept slot
    /// gets mean 0, scale 1). Zero-variance columns keep scale 1 so the
    /// centered column becomes identically zero and its coefficient is
    /// driven to zero by the penalty.
    pub(crate) fn standardization(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n as f64;
        let mut means = vec![0.0; self.p];
        let mut scales = vec![1.0; self.p];
        for j in 1..self.p {
            let mut sum = 0.0;
            for i in 0..self.n {
                sum += self.value(i, j);
            }
            let mean = sum / n;
            let mut ss = 0.0;
            for i in 0..self.n {
                let d = self.value(i, j) - mean;
                ss += d * d;
            }
            let sd = (ss / n).sqrt();
            means[j] = mean;
            scales[j] = if sd > 1e-12 { sd } else { 1.0 };
        }
        (means, scales)
    }

    pub(crate) fn standardized(&self, means: &[f64], scales: &[f64]) -> DesignMatrix {
        let mut data = self.data.clone();
        for i in 0..self.n {
            for j in 1..self.p {
                data[i * self.p + j] = (data[i * self.p + j] - means[j]) / scales[j];
            }
        }
        DesignMatrix {
            labels: self.labels.clone(),
            data,
            n: self.n,
            p: self.p,
        }
    }
}

/// Build a design matrix from declared variables and interaction terms.
///
/// Column order is deterministic: intercept, then one dummy per
/// non-reference level of each variable in declared order (the reference
/// level is the first declared level), then interaction columns in
/// declared order. An interaction over variables with `L1, L2, ...`
/// levels contributes `(L1-1)(L2-1)...` product columns.
pub fn build_design(
    data: &SurveyDataset,
    vars: &[String],
    interactions: &[Vec<String>],
) -> Result<DesignMatrix, GlmError> {
    let n = data.n();
    // (var name, level index, level label) for each dummy column
    let mut dummies: Vec<(String, u16, String)> = Vec::new();
    for name in vars {
        let var = data
            .schema
            .var(name)
            .ok_or_else(|| GlmError::UnknownVariable(name.clone()))?;
        if vars.iter().filter(|v| *v == name).count() > 1 {
            return Err(GlmError::Shape(format!("variable '{name}' listed twice")));
        }
        for (ix, level) in var.levels.iter().enumerate().skip(1) {
            dummies.push((name.clone(), ix as u16, level.clone()));
        }
    }

    let mut labels = vec!["(intercept)".to_string()];
    labels.extend(
        dummies
            .iter()
            .map(|(name, _, level)| format!("{name}={level}")),
    );

    // Interaction column spec: list of (var, level index) conditions.
    let mut inter_cols: Vec<Vec<(String, u16)>> = Vec::new();
    for group in interactions {
        if group.len() < 2 || group.len() > 3 {
            return Err(GlmError::Shape(
                "interactions must involve two or three variables".into(),
            ));
        }
        let mut per_var: Vec<Vec<(String, u16, String)>> = Vec::new();
        for name in group {
            let var = data
                .schema
                .var(name)
                .ok_or_else(|| GlmError::UnknownVariable(name.clone()))?;
            per_var.push(
                var.levels
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(ix, level)| (name.clone(), ix as u16, level.clone()))
                    .collect(),
            );
        }
        // cartesian product over the non-reference levels of each variable
        let mut combos: Vec<Vec<(String, u16, String)>> = vec![Vec::new()];
        for options in &per_var {
            let mut next = Vec::new();
            for combo in &combos {
                for opt in options {
                    let mut c = combo.clone();
                    c.push(opt.clone());
                    next.push(c);
                }
            }
            combos = next;
        }
        for combo in combos {
            let label = combo
                .iter()
                .map(|(name, _, level)| format!("{name}={level}"))
                .collect::<Vec<_>>()
                .join(":");
            labels.push(label);
            inter_cols.push(
                combo
                    .into_iter()
                    .map(|(name, ix, _)| (name, ix))
                    .collect(),
            );
        }
    }

    let p = labels.len();
    let mut matrix = vec![0.0; n * p];
    for i in 0..n {
        matrix[i * p] = 1.0;
        for (k, (name, ix, _)) in dummies.iter().enumerate() {
            let lv = data
                .level(name, i)
                .ok_or_else(|| GlmError::UnknownVariable(name.clone()))?;
            if lv == *ix {
                matrix[i * p + 1 + k] = 1.0;
            }
        }
        for (k, conds) in inter_cols.iter().enumerate() {
            let all = conds.iter().all(|(name, ix)| {
                data.level(name, i).map(|lv| lv == *ix).unwrap_or(false)
            });
            if all {
                matrix[i * p + 1 + dummies.len() + k] = 1.0;
            }
        }
    }
    DesignMatrix::from_raw(labels, matrix, n)
}

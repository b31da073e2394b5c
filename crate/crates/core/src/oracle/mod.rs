//! Enumerable synthetic populations for exact verification.
//!
//! A [`DiscretePopulation`] is a finite joint table over (population
//! profile, survey-only profile, area) with a cell-level mean-outcome
//! law and an area-specific sampling law. Two structural choices make
//! the pooling theory hold by construction: the outcome law takes no
//! area argument, so the outcome is independent of the area given the
//! covariates, and the sampling law takes no survey-only-covariate
//! argument, so selection is ignorable given the population covariates
//! and the area. An optional per-area additive shift on the outcome law
//! deliberately breaks the first property for robustness studies.
//!
//! Because everything is enumerable, the target area means, the
//! identification functional, and its direct/indirect decomposition can
//! all be evaluated exactly — no sampling error — which turns the
//! identification results into executable checks.

pub mod mc;

use rand::Rng;
use thiserror::Error;

use crate::data::{
    CovariateSchema, DataError, PopulationTable, Profile, SurveyDataset, VarDef,
};
use crate::rng::stream_rng;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("population would have {0} cells, above the enumerable bound of {MAX_CELLS}")]
    TooManyCells(usize),
    #[error("invalid population spec: {0}")]
    BadSpec(String),
    #[error("area index {0} has zero total count")]
    EmptyArea(usize),
    #[error("overlap violation: area '{area}' carries no mass at population cell {cell}")]
    OverlapViolation { area: String, cell: String },
    #[error("metric inputs have mismatched or empty lengths")]
    LengthMismatch,
    #[error("correlation undefined: an input has zero variance")]
    ZeroVariance,
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Hard cap on enumerable population size.
pub const MAX_CELLS: usize = 1_000_000;

/// Blueprint for a randomly generated discrete population.
#[derive(Debug, Clone)]
pub struct PopulationSpec {
    /// Number of areas `J`.
    pub areas: usize,
    /// Level counts of the population covariates (e.g. `[2, 2]`).
    pub xp_levels: Vec<usize>,
    /// Level counts of the survey-only covariates.
    pub xs_levels: Vec<usize>,
    /// Cell counts are drawn uniformly from this range.
    pub count_range: (f64, f64),
    /// Sampling probabilities are drawn uniformly from this range; must
    /// stay within (0, 1].
    pub sampling_range: (f64, f64),
    /// Mean outcomes are drawn uniformly from this range within [0, 1].
    pub outcome_range: (f64, f64),
    /// Additive outcome shift applied to `shift_area` (zero preserves
    /// area ignorability).
    pub gamma_shift: f64,
    pub shift_area: usize,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        PopulationSpec {
            areas: 2,
            xp_levels: vec![2, 2],
            xs_levels: vec![2],
            count_range: (20.0, 120.0),
            sampling_range: (0.05, 0.5),
            outcome_range: (0.2, 0.8),
            gamma_shift: 0.0,
            shift_area: 0,
        }
    }
}

fn radix_size(levels: &[usize]) -> usize {
    levels.iter().product::<usize>().max(1)
}

/// Mixed-radix decode, first variable most significant.
fn decode(mut idx: usize, levels: &[usize]) -> Vec<u16> {
    let mut digits = vec![0u16; levels.len()];
    for (slot, &base) in digits.iter_mut().zip(levels).rev() {
        *slot = (idx % base) as u16;
        idx /= base;
    }
    digits
}

/// A fully enumerated finite population.
#[derive(Debug, Clone)]
pub struct DiscretePopulation {
    pub areas: usize,
    pub xp_levels: Vec<usize>,
    pub xs_levels: Vec<usize>,
    /// Cell counts, indexed `(xp * xs_cells + xs) * areas + a`.
    counts: Vec<f64>,
    /// Base mean outcome per (xp, xs) cell, indexed `xp * xs_cells + xs`.
    mu: Vec<f64>,
    /// Sampling probability per (xp, area), indexed `xp * areas + a`.
    pi: Vec<f64>,
    /// Additive outcome shift per area (all zero when area ignorability
    /// holds by construction).
    outcome_shift: Vec<f64>,
    pub seed: u64,
}

impl DiscretePopulation {
    /// Draw a population from the spec, deterministically in `seed`.
    pub fn generate(spec: &PopulationSpec, seed: u64) -> Result<Self, OracleError> {
        if spec.areas == 0 || spec.xp_levels.is_empty() {
            return Err(OracleError::BadSpec(
                "need at least one area and one population covariate".into(),
            ));
        }
        if spec.xp_levels.iter().chain(&spec.xs_levels).any(|&l| l < 2) {
            return Err(OracleError::BadSpec("every covariate needs >= 2 levels".into()));
        }
        if spec.shift_area >= spec.areas {
            return Err(OracleError::BadSpec("shift_area out of range".into()));
        }
        let (lo, hi) = spec.sampling_range;
        if !(lo > 0.0 && hi <= 1.0 && lo <= hi) {
            return Err(OracleError::BadSpec(
                "sampling range must sit inside (0, 1]".into(),
            ));
        }
        let (clo, chi) = spec.count_range;
        if !(clo > 0.0 && clo <= chi) {
            return Err(OracleError::BadSpec("count range must be positive".into()));
        }
        let (olo, ohi) = spec.outcome_range;
        if !(0.0 <= olo && olo <= ohi && ohi <= 1.0) {
            return Err(OracleError::BadSpec(
                "outcome range must sit inside [0, 1]".into(),
            ));
        }
        let xp_cells = radix_size(&spec.xp_levels);
        let xs_cells = radix_size(&spec.xs_levels);
        let total_cells = xp_cells * xs_cells * spec.areas;
        if total_cells > MAX_CELLS {
            return Err(OracleError::TooManyCells(total_cells));
        }

        let mut rng = stream_rng(seed, "population");
        let counts: Vec<f64> = (0..total_cells)
            .map(|_| rng.random_range(clo..chi))
            .collect();
        let mu: Vec<f64> = (0..xp_cells * xs_cells)
            .map(|_| rng.random_range(olo..ohi))
            .collect();
        let pi: Vec<f64> = (0..xp_cells * spec.areas)
            .map(|_| rng.random_range(lo..hi))
            .collect();
        let mut outcome_shift = vec![0.0; spec.areas];
        outcome_shift[spec.shift_area] = spec.gamma_shift;

        Ok(DiscretePopulation {
            areas: spec.areas,
            xp_levels: spec.xp_levels.clone(),
            xs_levels: spec.xs_levels.clone(),
            counts,
            mu,
            pi,
            outcome_shift,
            seed,
        })
    }

    /// Assemble a population from explicit tables (used by tests).
    pub fn from_parts(
        areas: usize,
        xp_levels: Vec<usize>,
        xs_levels: Vec<usize>,
        counts: Vec<f64>,
        mu: Vec<f64>,
        pi: Vec<f64>,
        outcome_shift: Vec<f64>,
    ) -> Result<Self, OracleError> {
        let xp_cells = radix_size(&xp_levels);
        let xs_cells = radix_size(&xs_levels);
        if counts.len() != xp_cells * xs_cells * areas
            || mu.len() != xp_cells * xs_cells
            || pi.len() != xp_cells * areas
            || outcome_shift.len() != areas
        {
            return Err(OracleError::BadSpec("table sizes do not match levels".into()));
        }
        if counts.iter().any(|&c| c < 0.0 || !c.is_finite()) {
            return Err(OracleError::BadSpec("counts must be nonnegative".into()));
        }
        if !(counts.iter().sum::<f64>() > 0.0) {
            return Err(OracleError::BadSpec("total count must be positive".into()));
        }
        if pi.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(OracleError::BadSpec(
                "sampling probabilities must sit inside (0, 1]".into(),
            ));
        }
        if mu.iter().any(|&m| !(0.0..=1.0).contains(&m)) {
            return Err(OracleError::BadSpec("mean outcomes must sit in [0, 1]".into()));
        }
        Ok(DiscretePopulation {
            areas,
            xp_levels,
            xs_levels,
            counts,
            mu,
            pi,
            outcome_shift,
            seed: 0,
        })
    }

    pub fn xp_cells(&self) -> usize {
        radix_size(&self.xp_levels)
    }

    pub fn xs_cells(&self) -> usize {
        radix_size(&self.xs_levels)
    }

    pub fn count(&self, xp: usize, xs: usize, area: usize) -> f64 {
        self.counts[(xp * self.xs_cells() + xs) * self.areas + area]
    }

    pub fn sampling_prob(&self, xp: usize, area: usize) -> f64 {
        self.pi[xp * self.areas + area]
    }

    /// Mean outcome of a cell, after the per-area shift, clamped to
    /// [0, 1] so Bernoulli draws stay valid.
    pub fn mean_outcome(&self, xp: usize, xs: usize, area: usize) -> f64 {
        (self.mu[xp * self.xs_cells() + xs] + self.outcome_shift[area]).clamp(0.0, 1.0)
    }

    pub fn area_label(&self, j: usize) -> String {
        format!("a{}", j + 1)
    }

    /// Exact per-area population means by full enumeration.
    pub fn true_area_means(&self) -> Result<Vec<f64>, OracleError> {
        let (xp_cells, xs_cells) = (self.xp_cells(), self.xs_cells());
        let mut taus = Vec::with_capacity(self.areas);
        for a in 0..self.areas {
            let mut mass = 0.0;
            let mut sum = 0.0;
            for xp in 0..xp_cells {
                for xs in 0..xs_cells {
                    let c = self.count(xp, xs, a);
                    mass += c;
                    sum += c * self.mean_outcome(xp, xs, a);
                }
            }
            if !(mass > 0.0) {
                return Err(OracleError::EmptyArea(a));
            }
            taus.push(sum / mass);
        }
        Ok(taus)
    }

    fn describe_xp(&self, xp: usize) -> String {
        let digits = decode(xp, &self.xp_levels);
        digits
            .iter()
            .enumerate()
            .map(|(k, d)| format!("xp{}=l{}", k + 1, d))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Exact population-level value of the pooling identification
    /// functional for every area: the expectation of
    /// `1{S=1}/Pr(A=j) * zeta(X) * Pr(A=j|XP)/Pr(S=1|XP) * Y` under the
    /// joint law implied by the tables. With the outcome shift at zero
    /// this equals [`Self::true_area_means`] up to rounding.
    pub fn evaluate_identification(&self) -> Result<Vec<f64>, OracleError> {
        let (xp_cells, xs_cells, j_areas) = (self.xp_cells(), self.xs_cells(), self.areas);
        let total: f64 = self.counts.iter().sum();

        // marginal area probabilities
        let mut pr_area = vec![0.0; j_areas];
        for xp in 0..xp_cells {
            for xs in 0..xs_cells {
                for a in 0..j_areas {
                    pr_area[a] += self.count(xp, xs, a);
                }
            }
        }
        for p in pr_area.iter_mut() {
            *p /= total;
        }

        // per-xp aggregates
        let mut mass_xp = vec![0.0; xp_cells];
        let mut s1_mass_xp = vec![0.0; xp_cells];
        let mut area_mass_xp = vec![0.0; xp_cells * j_areas];
        for xp in 0..xp_cells {
            for xs in 0..xs_cells {
                for a in 0..j_areas {
                    let c = self.count(xp, xs, a);
                    mass_xp[xp] += c;
                    s1_mass_xp[xp] += c * self.sampling_prob(xp, a);
                    area_mass_xp[xp * j_areas + a] += c;
                }
            }
        }

        let mut values = vec![0.0; j_areas];
        for j in 0..j_areas {
            for xp in 0..xp_cells {
                if mass_xp[xp] == 0.0 {
                    continue;
                }
                if area_mass_xp[xp * j_areas + j] == 0.0 {
                    return Err(OracleError::OverlapViolation {
                        area: self.area_label(j),
                        cell: self.describe_xp(xp),
                    });
                }
                // Pr(A=j | XP) and Pr(S=1 | XP)
                let p_j = area_mass_xp[xp * j_areas + j] / mass_xp[xp];
                let pr_s1 = s1_mass_xp[xp] / mass_xp[xp];
                // Pr(A=j | XP, S=1)
                let d_j = area_mass_xp[xp * j_areas + j] * self.sampling_prob(xp, j)
                    / s1_mass_xp[xp];
                for xs in 0..xs_cells {
                    let s1_cell: f64 = (0..j_areas)
                        .map(|a| self.count(xp, xs, a) * self.sampling_prob(xp, a))
                        .sum();
                    if s1_cell == 0.0 {
                        continue;
                    }
                    // Pr(A=j | XP, XS, S=1)
                    let q_j =
                        self.count(xp, xs, j) * self.sampling_prob(xp, j) / s1_cell;
                    let zeta = q_j / d_j;
                    for a in 0..j_areas {
                        let c = self.count(xp, xs, a);
                        if c == 0.0 {
                            continue;
                        }
                        let term = (c / total)
                            * self.sampling_prob(xp, a)
                            * (1.0 / pr_area[j])
                            * zeta
                            * (p_j / pr_s1)
                            * self.mean_outcome(xp, xs, a);
                        values[j] += term;
                    }
                }
            }
        }
        Ok(values)
    }

    /// Exact evaluation of the two-term (direct + indirect) form of the
    /// identification functional. The terms sum to
    /// [`Self::evaluate_identification`] up to rounding regardless of
    /// whether the outcome shift is zero — the split is an algebraic
    /// identity, not an assumption.
    pub fn evaluate_decomposition(&self) -> Result<Vec<(f64, f64)>, OracleError> {
        let (xp_cells, xs_cells, j_areas) = (self.xp_cells(), self.xs_cells(), self.areas);
        let total: f64 = self.counts.iter().sum();
        let mut pr_area = vec![0.0; j_areas];
        for xp in 0..xp_cells {
            for xs in 0..xs_cells {
                for a in 0..j_areas {
                    pr_area[a] += self.count(xp, xs, a);
                }
            }
        }
        for p in pr_area.iter_mut() {
            *p /= total;
        }

        let mut out = Vec::with_capacity(j_areas);
        for j in 0..j_areas {
            let mut direct = 0.0;
            let mut indirect = 0.0;
            for xp in 0..xp_cells {
                let pi_j = self.sampling_prob(xp, j);
                for xs in 0..xs_cells {
                    let s1_cell: f64 = (0..j_areas)
                        .map(|a| self.count(xp, xs, a) * self.sampling_prob(xp, a))
                        .sum();
                    if s1_cell == 0.0 {
                        continue;
                    }
                    let q_j = self.count(xp, xs, j) * pi_j / s1_cell;
                    // direct term: own-area mass with the membership factor
                    let c_j = self.count(xp, xs, j);
                    if c_j > 0.0 {
                        direct += (c_j / total)
                            * pi_j
                            * (1.0 / pr_area[j])
                            * (self.mean_outcome(xp, xs, j) / pi_j)
                            * q_j;
                    }
                    // indirect term: other-area mass carrying the odds factor
                    for a in 0..j_areas {
                        if a == j {
                            continue;
                        }
                        let c = self.count(xp, xs, a);
                        if c == 0.0 {
                            continue;
                        }
                        if q_j >= 1.0 {
                            return Err(OracleError::OverlapViolation {
                                area: self.area_label(j),
                                cell: self.describe_xp(xp),
                            });
                        }
                        let odds = q_j / (1.0 - q_j);
                        indirect += (c / total)
                            * self.sampling_prob(xp, a)
                            * (1.0 / pr_area[j])
                            * odds
                            * (self.mean_outcome(xp, xs, a) / pi_j)
                            * (1.0 - q_j);
                    }
                }
            }
            out.push((direct, indirect));
        }
        Ok(out)
    }

    /// Marginal sampling rate given a population profile, the quantity
    /// whose inverse plays the role of a national weight.
    pub fn sampling_rate_given_xp(&self, xp: usize) -> f64 {
        let (xs_cells, j_areas) = (self.xs_cells(), self.areas);
        let mut mass = 0.0;
        let mut s1 = 0.0;
        for xs in 0..xs_cells {
            for a in 0..j_areas {
                let c = self.count(xp, xs, a);
                mass += c;
                s1 += c * self.sampling_prob(xp, a);
            }
        }
        s1 / mass
    }

    /// Covariate schema of samples drawn from this population.
    pub fn schema(&self) -> CovariateSchema {
        let xp_vars: Vec<VarDef> = self
            .xp_levels
            .iter()
            .enumerate()
            .map(|(k, &l)| var_def("xp", k, l))
            .collect();
        let xs_vars: Vec<VarDef> = self
            .xs_levels
            .iter()
            .enumerate()
            .map(|(k, &l)| var_def("xs", k, l))
            .collect();
        CovariateSchema::new(xp_vars, xs_vars, "y", "area").expect("generated schema is valid")
    }

    /// Marginalize the joint table over the survey-only covariates into
    /// the population table the estimators consume.
    pub fn population_table(&self) -> PopulationTable {
        let (xp_cells, xs_cells, j_areas) = (self.xp_cells(), self.xs_cells(), self.areas);
        let mut cells = std::collections::BTreeMap::new();
        for xp in 0..xp_cells {
            let mut per_area = vec![0.0; j_areas];
            for xs in 0..xs_cells {
                for (a, slot) in per_area.iter_mut().enumerate() {
                    *slot += self.count(xp, xs, a);
                }
            }
            cells.insert(Profile(decode(xp, &self.xp_levels)), per_area);
        }
        let areas = (0..j_areas).map(|j| self.area_label(j)).collect();
        let vars = self
            .xp_levels
            .iter()
            .enumerate()
            .map(|(k, &l)| var_def("xp", k, l))
            .collect();
        PopulationTable::from_cells(areas, vars, cells)
            .expect("generated table satisfies its invariants")
    }

    /// Draw `n` respondents with replacement, cell probability
    /// proportional to `count * sampling probability`; binary outcomes
    /// are Bernoulli draws from the cell mean. The recorded national
    /// weight is the exact inverse of the profile-level sampling rate,
    /// so estimator tests run with known propensities.
    pub fn draw_sample(&self, n: usize, seed: u64) -> Result<SurveyDataset, OracleError> {
        if n == 0 {
            return Err(OracleError::BadSpec("sample size must be positive".into()));
        }
        let (xp_cells, xs_cells, j_areas) = (self.xp_cells(), self.xs_cells(), self.areas);
        let mut cumulative = Vec::with_capacity(xp_cells * xs_cells * j_areas);
        let mut acc = 0.0;
        for xp in 0..xp_cells {
            for xs in 0..xs_cells {
                for a in 0..j_areas {
                    acc += self.count(xp, xs, a) * self.sampling_prob(xp, a);
                    cumulative.push(acc);
                }
            }
        }
        let total = acc;
        let inv_rate: Vec<f64> = (0..xp_cells)
            .map(|xp| 1.0 / self.sampling_rate_given_xp(xp))
            .collect();

        let mut rng = stream_rng(seed, "sample");
        let mut outcomes = Vec::with_capacity(n);
        let mut area_labels: Vec<String> = Vec::new();
        let mut areas_idx = Vec::with_capacity(n);
        let mut xp_cols: Vec<Vec<u16>> = vec![Vec::with_capacity(n); self.xp_levels.len()];
        let mut xs_cols: Vec<Vec<u16>> = vec![Vec::with_capacity(n); self.xs_levels.len()];
        let mut weights = Vec::with_capacity(n);

        for _ in 0..n {
            let u: f64 = rng.random::<f64>() * total;
            let mut cell = cumulative.partition_point(|&c| c <= u);
            if cell >= cumulative.len() {
                cell = cumulative.len() - 1;
            }
            let a = cell % j_areas;
            let rest = cell / j_areas;
            let xs = rest % xs_cells;
            let xp = rest / xs_cells;

            let mu = self.mean_outcome(xp, xs, a);
            let y = (rng.random::<f64>() < mu) as u8 as f64;
            let label = self.area_label(a);
            let idx = area_labels
                .iter()
                .position(|l| *l == label)
                .unwrap_or_else(|| {
                    area_labels.push(label);
                    area_labels.len() - 1
                });
            areas_idx.push(idx as u32);
            outcomes.push(y);
            for (col, digit) in xp_cols.iter_mut().zip(decode(xp, &self.xp_levels)) {
                col.push(digit);
            }
            for (col, digit) in xs_cols.iter_mut().zip(decode(xs, &self.xs_levels)) {
                col.push(digit);
            }
            weights.push(inv_rate[xp]);
        }

        Ok(SurveyDataset::from_parts(
            self.schema(),
            outcomes,
            area_labels,
            areas_idx,
            xp_cols,
            xs_cols,
            Some(weights),
        )?)
    }
}

fn var_def(prefix: &str, k: usize, levels: usize) -> VarDef {
    VarDef {
        name: format!("{prefix}{}", k + 1),
        levels: (0..levels).map(|l| format!("l{l}")).collect(),
    }
}

/// Residuals of the two enumeration identities behind the weighting
/// proofs, checked on one random finite distribution.
#[derive(Debug, Clone, Copy)]
pub struct LemmaCheck {
    /// `| E[E(X|Z) Y] - E[X E(Y|Z)] |`
    pub residual_swap: f64,
    /// `max_x | E[Y | X=x, D=1] - E[D Y / Pr(D=1|X) | X=x] |`
    pub residual_ipw: f64,
}

impl LemmaCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.residual_swap <= tol && self.residual_ipw <= tol
    }
}

/// Build a random finite joint law over (X, Y, Z, D) with strictly
/// positive cell probabilities — so `Pr(D=1 | X) > 0` holds everywhere —
/// and verify by enumeration that conditional-expectation swapping and
/// the inverse-probability representation of a conditional mean both
/// hold.
pub fn lemma_property_check(seed: u64) -> LemmaCheck {
    let mut rng = stream_rng(seed, "lemma");
    let nx = rng.random_range(2..=4usize);
    let ny = rng.random_range(2..=4usize);
    let nz = rng.random_range(2..=4usize);

    let x_vals: Vec<f64> = (0..nx).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y_vals: Vec<f64> = (0..ny).map(|_| rng.random_range(-1.0..1.0)).collect();

    let cells = nx * ny * nz * 2;
    let mut prob: Vec<f64> = (0..cells).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = prob.iter().sum();
    for p in prob.iter_mut() {
        *p /= total;
    }
    let p = |x: usize, y: usize, z: usize, d: usize| prob[((x * ny + y) * nz + z) * 2 + d];

    // identity (a): E[E(X|Z) Y] = E[X E(Y|Z)]
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for z in 0..nz {
        let mut pz = 0.0;
        let mut ex = 0.0;
        let mut ey = 0.0;
        for x in 0..nx {
            for y in 0..ny {
                for d in 0..2 {
                    let pr = p(x, y, z, d);
                    pz += pr;
                    ex += pr * x_vals[x];
                    ey += pr * y_vals[y];
                }
            }
        }
        let (ex_z, ey_z) = (ex / pz, ey / pz);
        for x in 0..nx {
            for y in 0..ny {
                for d in 0..2 {
                    let pr = p(x, y, z, d);
                    lhs += pr * ex_z * y_vals[y];
                    rhs += pr * x_vals[x] * ey_z;
                }
            }
        }
    }
    let residual_swap = (lhs - rhs).abs();

    // identity (b): E[Y | X, D=1] = E[D Y / Pr(D=1|X) | X]
    let mut residual_ipw = 0.0f64;
    for x in 0..nx {
        let mut px = 0.0;
        let mut px_d1 = 0.0;
        let mut ey_d1 = 0.0;
        for y in 0..ny {
            for z in 0..nz {
                for d in 0..2 {
                    let pr = p(x, y, z, d);
                    px += pr;
                    if d == 1 {
                        px_d1 += pr;
                        ey_d1 += pr * y_vals[y];
                    }
                }
            }
        }
        let lhs = ey_d1 / px_d1;
        let pr_d1_x = px_d1 / px;
        let mut rhs = 0.0;
        for y in 0..ny {
            for z in 0..nz {
                rhs += (p(x, y, z, 1) / px) * y_vals[y] / pr_d1_x;
            }
        }
        residual_ipw = residual_ipw.max((lhs - rhs).abs());
    }

    LemmaCheck {
        residual_swap,
        residual_ipw,
    }
}

/// Error metrics of a vector of estimates against the truth.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub rmse: f64,
    pub mae: f64,
    pub mean_error: f64,
    /// Pearson correlation of estimates with truth; `None` when either
    /// side has zero variance.
    pub correlation: Option<f64>,
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        None
    } else {
        Some(cov / (va.sqrt() * vb.sqrt()))
    }
}

/// Root-mean-square error, mean absolute error, mean (signed) error, and
/// the estimate/truth correlation.
pub fn fit_metrics(estimates: &[f64], truth: &[f64]) -> Result<MetricReport, OracleError> {
    if estimates.len() != truth.len() || estimates.is_empty() {
        return Err(OracleError::LengthMismatch);
    }
    let n = estimates.len() as f64;
    let mut sq = 0.0;
    let mut abs = 0.0;
    let mut signed = 0.0;
    for (e, t) in estimates.iter().zip(truth) {
        let d = e - t;
        sq += d * d;
        abs += d.abs();
        signed += d;
    }
    let correlation = if estimates.len() >= 2 {
        pearson(estimates, truth)
    } else {
        None
    };
    Ok(MetricReport {
        rmse: (sq / n).sqrt(),
        mae: abs / n,
        mean_error: signed / n,
        correlation,
    })
}

/// Pearson correlation between the error vectors of two estimate sets
/// measured against a shared truth.
pub fn error_correlation(
    est_a: &[f64],
    est_b: &[f64],
    truth: &[f64],
) -> Result<f64, OracleError> {
    if est_a.len() != truth.len() || est_b.len() != truth.len() || est_a.len() < 3 {
        return Err(OracleError::LengthMismatch);
    }
    let err_a: Vec<f64> = est_a.iter().zip(truth).map(|(e, t)| e - t).collect();
    let err_b: Vec<f64> = est_b.iter().zip(truth).map(|(e, t)| e - t).collect();
    pearson(&err_a, &err_b).ok_or(OracleError::ZeroVariance)
}

//! Ordinary least squares with rank-deficiency handling — the linear
//! path behind the ignorability test regression.

use super::design::DesignMatrix;
use super::{cholesky_inverse, GlmError};

/// An OLS fit over the linearly independent subset of columns.
///
/// Columns are examined in design order; a column that is (numerically)
/// a linear combination of the columns already kept is dropped and its
/// coefficient reported as zero. Keeping earlier columns first means the
/// intercept and any leading indicator survive while redundant trailing
/// dummies are removed.
#[derive(Debug, Clone)]
pub struct OlsFit {
    /// Coefficients aligned with the full design (dropped columns get 0).
    pub coefficients: Vec<f64>,
    /// Indices of retained columns.
    pub kept: Vec<usize>,
    /// Labels of dropped columns.
    pub dropped: Vec<String>,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    /// `(X_kept' X_kept)^{-1}`, row-major over kept columns.
    pub xtx_inv: Vec<f64>,
    pub n: usize,
    pub rank: usize,
}

/// Fit OLS of `y` on the design, dropping rank-deficient columns.
pub fn fit_ols(x: &DesignMatrix, y: &[f64]) -> Result<OlsFit, GlmError> {
    let (n, p) = (x.n_rows(), x.n_cols());
    if y.len() != n {
        return Err(GlmError::Shape("response length mismatch".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(GlmError::NonFinite("response".into()));
    }

    // Gram matrix and X'y
    let mut gram = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    for i in 0..n {
        let row = x.row(i);
        for a in 0..p {
            xty[a] += row[a] * y[i];
            for b in a..p {
                gram[a * p + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[a * p + b] = gram[b * p + a];
        }
    }

    // Greedy Cholesky over columns in order, skipping dependent ones.
    let mut kept: Vec<usize> = Vec::new();
    let mut dropped = Vec::new();
    // rows of the lower factor restricted to kept columns
    let mut l_rows: Vec<Vec<f64>> = Vec::new();
    for j in 0..p {
        let m = kept.len();
        // forward-substitute L * v = gram[kept, j]
        let mut v = vec![0.0; m];
        for (r, &kc) in kept.iter().enumerate() {
            let mut sum = gram[kc * p + j];
            for s in 0..r {
                sum -= l_rows[r][s] * v[s];
            }
            v[r] = sum / l_rows[r][r];
        }
        let diag = gram[j * p + j] - v.iter().map(|t| t * t).sum::<f64>();
        let threshold = 1e-10 * gram[j * p + j].max(1e-300);
        if diag <= threshold {
            dropped.push(x.labels()[j].clone());
            continue;
        }
        let mut row = v;
        row.push(diag.sqrt());
        l_rows.push(row);
        kept.push(j);
    }
    let rank = kept.len();
    if rank == 0 {
        return Err(GlmError::Singular("all design columns dropped".into()));
    }

    // Solve L L' b = X'y restricted to kept columns.
    let m = rank;
    let mut flat_l = vec![0.0; m * m];
    for (r, row) in l_rows.iter().enumerate() {
        for (s, &v) in row.iter().enumerate() {
            flat_l[r * m + s] = v;
        }
    }
    let b_kept = {
        let rhs: Vec<f64> = kept.iter().map(|&j| xty[j]).collect();
        super::cholesky_solve(&flat_l, m, &rhs)
    };
    let xtx_inv = cholesky_inverse(&flat_l, m);

    let mut coefficients = vec![0.0; p];
    for (r, &j) in kept.iter().enumerate() {
        coefficients[j] = b_kept[r];
    }
    let mut fitted = vec![0.0; n];
    let mut residuals = vec![0.0; n];
    for i in 0..n {
        let row = x.row(i);
        let f: f64 = kept.iter().enumerate().map(|(r, &j)| b_kept[r] * row[j]).sum();
        fitted[i] = f;
        residuals[i] = y[i] - f;
    }

    Ok(OlsFit {
        coefficients,
        kept,
        dropped,
        residuals,
        fitted,
        xtx_inv,
        n,
        rank,
    })
}

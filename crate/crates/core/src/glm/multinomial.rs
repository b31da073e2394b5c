//! Ridge-penalized multinomial logit with the last class as reference.

use super::design::DesignMatrix;
use super::{
    cholesky, cholesky_solve, dot, resolve_weights, softmax, unstandardize, Family, GlmError,
    GlmFit, RidgeOptions, Standardization,
};

fn class_probs(beta: &[Vec<f64>], row: &[f64], k: usize) -> Vec<f64> {
    // free classes 0..k-1 carry coefficients; class k-1 is pinned at zero
    let mut etas = Vec::with_capacity(k);
    for c in 0..k - 1 {
        etas.push(dot(row, &beta[c]));
    }
    etas.push(0.0);
    softmax(&etas)
}

/// Penalized multinomial objective over the free-class coefficient
/// vectors (`beta.len() == k - 1`).
pub fn multinomial_penalized_objective(
    beta: &[Vec<f64>],
    x: &DesignMatrix,
    y: &[usize],
    k: usize,
    case_weights: Option<&[f64]>,
    lambda: f64,
) -> f64 {
    let mut obj = 0.0;
    for i in 0..x.n_rows() {
        let w = case_weights.map_or(1.0, |w| w[i]);
        let row = x.row(i);
        // log-sum-exp of (eta_0..eta_{k-2}, 0) minus the observed eta
        let mut etas: Vec<f64> = (0..k - 1).map(|c| dot(row, &beta[c])).collect();
        etas.push(0.0);
        let max = etas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + etas.iter().map(|e| (e - max).exp()).sum::<f64>().ln();
        obj += w * (lse - etas[y[i]]);
    }
    let penalty: f64 = beta
        .iter()
        .map(|b| b[1..].iter().map(|v| v * v).sum::<f64>())
        .sum();
    obj + 0.5 * lambda * penalty
}

/// Analytic gradient of [`multinomial_penalized_objective`], flattened
/// class-major: entry `c * p + j` differentiates class `c`, column `j`.
pub fn multinomial_penalized_gradient(
    beta: &[Vec<f64>],
    x: &DesignMatrix,
    y: &[usize],
    k: usize,
    case_weights: Option<&[f64]>,
    lambda: f64,
) -> Result<Vec<f64>, GlmError> {
    let (n, p) = (x.n_rows(), x.n_cols());
    if beta.len() != k - 1 || beta.iter().any(|b| b.len() != p) || y.len() != n {
        return Err(GlmError::Shape("multinomial gradient shape mismatch".into()));
    }
    let w = resolve_weights(n, case_weights)?;
    let mut g = vec![0.0; (k - 1) * p];
    for i in 0..n {
        let row = x.row(i);
        let probs = class_probs(beta, row, k);
        for c in 0..k - 1 {
            let resid = w[i] * (probs[c] - if y[i] == c { 1.0 } else { 0.0 });
            for j in 0..p {
                g[c * p + j] += resid * row[j];
            }
        }
    }
    for c in 0..k - 1 {
        for j in 1..p {
            g[c * p + j] += lambda * beta[c][j];
        }
    }
    Ok(g)
}

/// Fit a ridge-penalized multinomial logit over classes `0..k`, with the
/// last class as the reference (its coefficients are pinned to zero).
/// Class labels in `y` must be `< k` and every class must be observed.
pub fn fit_ridge_multinomial(
    x: &DesignMatrix,
    y: &[usize],
    k: usize,
    case_weights: Option<&[f64]>,
    opts: &RidgeOptions,
) -> Result<GlmFit, GlmError> {
    let (n, p) = (x.n_rows(), x.n_cols());
    if y.len() != n {
        return Err(GlmError::Shape("response length mismatch".into()));
    }
    if k < 2 {
        return Err(GlmError::Shape("multinomial fits need at least 2 classes".into()));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= k) {
        return Err(GlmError::Shape(format!("class label {bad} out of range")));
    }
    if !(opts.lambda > 0.0) {
        return Err(GlmError::BadLambda(opts.lambda));
    }
    let w = resolve_weights(n, case_weights)?;
    for class in 0..k {
        if !y
            .iter()
            .zip(&w)
            .any(|(&c, &wi)| c == class && wi > 0.0)
        {
            return Err(GlmError::EmptyClass(class));
        }
    }

    let (xs, standardization) = if opts.standardize {
        let (means, scales) = x.standardization();
        (
            x.standardized(&means, &scales),
            Some(Standardization { means, scales }),
        )
    } else {
        (x.clone(), None)
    };

    let free = k - 1;
    let dim = free * p;
    let mut beta = vec![vec![0.0; p]; free];
    let mut trace = vec![multinomial_penalized_objective(
        &beta,
        &xs,
        y,
        k,
        Some(&w),
        opts.lambda,
    )];
    let mut converged = false;
    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;

    for _ in 0..opts.max_iter {
        let g = multinomial_penalized_gradient(&beta, &xs, y, k, Some(&w), opts.lambda)?;
        grad_norm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if grad_norm < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;

        // Block Hessian: H[(c,j),(d,m)] = sum_i w_i x_ij x_im p_ic (1{c=d} - p_id)
        let mut h = vec![0.0; dim * dim];
        for i in 0..n {
            let row = xs.row(i);
            let probs = class_probs(&beta, row, k);
            for c in 0..free {
                for d in c..free {
                    let factor =
                        w[i] * probs[c] * (if c == d { 1.0 - probs[d] } else { -probs[d] });
                    if factor == 0.0 {
                        continue;
                    }
                    for a in 0..p {
                        let fa = factor * row[a];
                        let base_c = (c * p + a) * dim + d * p;
                        for b in 0..p {
                            h[base_c + b] += fa * row[b];
                        }
                    }
                }
            }
        }
        // mirror the upper class blocks and add the ridge diagonal
        for c in 0..free {
            for d in 0..c {
                for a in 0..p {
                    for b in 0..p {
                        h[(c * p + a) * dim + d * p + b] = h[(d * p + b) * dim + c * p + a];
                    }
                }
            }
        }
        for c in 0..free {
            for j in 1..p {
                let idx = c * p + j;
                h[idx * dim + idx] += opts.lambda;
            }
            // tiny ridge on intercept entries keeps the system strictly
            // definite when predictions saturate
            let idx = c * p;
            h[idx * dim + idx] += 1e-12;
        }
        let l = cholesky(&h, dim)
            .ok_or_else(|| GlmError::Singular("multinomial Newton system".into()))?;
        let direction = cholesky_solve(&l, dim, &g);

        let current = *trace.last().unwrap();
        // see the logistic solver: below objective rounding noise the
        // line search is uninformative, so take the pure Newton step
        let decrement = 0.5 * dot(&g, &direction);
        let noise = 1e-12 * (1.0 + current.abs());
        if decrement.abs() <= noise {
            for c in 0..free {
                for j in 0..p {
                    beta[c][j] -= direction[c * p + j];
                }
            }
            trace.push(multinomial_penalized_objective(
                &beta,
                &xs,
                y,
                k,
                Some(&w),
                opts.lambda,
            ));
            continue;
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate: Vec<Vec<f64>> = (0..free)
                .map(|c| {
                    (0..p)
                        .map(|j| beta[c][j] - step * direction[c * p + j])
                        .collect()
                })
                .collect();
            let obj =
                multinomial_penalized_objective(&candidate, &xs, y, k, Some(&w), opts.lambda);
            if obj <= current && obj.is_finite() {
                beta = candidate;
                trace.push(obj);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if !converged {
        let g = multinomial_penalized_gradient(&beta, &xs, y, k, Some(&w), opts.lambda)?;
        grad_norm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        converged = grad_norm < opts.tol;
    }

    let mut coefficients: Vec<Vec<f64>> = match &standardization {
        Some(s) => beta
            .iter()
            .map(|b| unstandardize(b, &s.means, &s.scales))
            .collect(),
        None => beta.clone(),
    };
    coefficients.push(vec![0.0; p]);
    let mut std_coefficients = beta;
    std_coefficients.push(vec![0.0; p]);

    Ok(GlmFit {
        family: Family::Multinomial(k),
        coefficients,
        std_coefficients,
        standardization,
        lambda: opts.lambda,
        converged,
        iterations,
        gradient_norm: grad_norm,
        objective_trace: trace,
        labels: x.labels().to_vec(),
        case_weights: case_weights.map(|w| w.to_vec()),
    })
}

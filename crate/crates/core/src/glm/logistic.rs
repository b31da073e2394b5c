//! Ridge-penalized binary logistic regression via damped Newton.

use super::design::DesignMatrix;
use super::{
    cholesky, cholesky_solve, dot, resolve_weights, sigmoid, unstandardize, Family, GlmError,
    GlmFit, RidgeOptions, Standardization,
};

/// Weighted negative log-likelihood plus the ridge term, evaluated on
/// the design exactly as given (no hidden standardization).
pub fn logistic_penalized_objective(
    beta: &[f64],
    x: &DesignMatrix,
    y: &[f64],
    case_weights: Option<&[f64]>,
    lambda: f64,
) -> f64 {
    let n = x.n_rows();
    let mut obj = 0.0;
    for i in 0..n {
        let eta = dot(x.row(i), beta);
        let w = case_weights.map_or(1.0, |w| w[i]);
        // -log lik: log(1 + e^eta) - y*eta, computed stably
        let nll = if eta > 0.0 {
            (1.0 - y[i]) * eta + (-eta).exp().ln_1p()
        } else {
            -y[i] * eta + eta.exp().ln_1p()
        };
        obj += w * nll;
    }
    let penalty: f64 = beta[1..].iter().map(|b| b * b).sum();
    obj + 0.5 * lambda * penalty
}

/// Analytic gradient of [`logistic_penalized_objective`]. The intercept
/// entry carries no penalty term.
pub fn logistic_penalized_gradient(
    beta: &[f64],
    x: &DesignMatrix,
    y: &[f64],
    case_weights: Option<&[f64]>,
    lambda: f64,
) -> Result<Vec<f64>, GlmError> {
    let (n, p) = (x.n_rows(), x.n_cols());
    if beta.len() != p || y.len() != n {
        return Err(GlmError::Shape("gradient shape mismatch".into()));
    }
    let w = resolve_weights(n, case_weights)?;
    let mut g = vec![0.0; p];
    for i in 0..n {
        let row = x.row(i);
        let resid = w[i] * (sigmoid(dot(row, beta)) - y[i]);
        for j in 0..p {
            g[j] += resid * row[j];
        }
    }
    for j in 1..p {
        g[j] += lambda * beta[j];
    }
    Ok(g)
}

fn check_response(y: &[f64]) -> Result<(), GlmError> {
    for &v in y {
        if v != 0.0 && v != 1.0 {
            return Err(GlmError::NonBinaryResponse(v));
        }
    }
    Ok(())
}

/// Fit a ridge-penalized logistic regression.
///
/// The penalty keeps coefficients finite even under perfect separation.
/// `converged` is false when the iteration cap is hit before the
/// gradient max-norm drops below tolerance.
pub fn fit_ridge_logistic(
    x: &DesignMatrix,
    y: &[f64],
    case_weights: Option<&[f64]>,
    opts: &RidgeOptions,
) -> Result<GlmFit, GlmError> {
    let (n, p) = (x.n_rows(), x.n_cols());
    if y.len() != n {
        return Err(GlmError::Shape("response length mismatch".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(GlmError::NonFinite("response".into()));
    }
    check_response(y)?;
    if !(opts.lambda > 0.0) {
        return Err(GlmError::BadLambda(opts.lambda));
    }
    let w = resolve_weights(n, case_weights)?;

    let (xs, standardization) = if opts.standardize {
        let (means, scales) = x.standardization();
        (
            x.standardized(&means, &scales),
            Some(Standardization { means, scales }),
        )
    } else {
        (x.clone(), None)
    };

    let mut beta = vec![0.0; p];
    let mut trace = vec![logistic_penalized_objective(
        &beta,
        &xs,
        y,
        Some(&w),
        opts.lambda,
    )];
    let mut converged = false;
    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;

    for _ in 0..opts.max_iter {
        let g = logistic_penalized_gradient(&beta, &xs, y, Some(&w), opts.lambda)?;
        grad_norm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if grad_norm < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;

        // Newton system: (X' diag(w p (1-p)) X + lambda D) d = g
        let mut h = vec![0.0; p * p];
        for i in 0..n {
            let row = xs.row(i);
            let pr = sigmoid(dot(row, &beta));
            let hw = (w[i] * pr * (1.0 - pr)).max(1e-12 * w[i].max(1e-300));
            for a in 0..p {
                let ra = hw * row[a];
                for b in a..p {
                    h[a * p + b] += ra * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                h[a * p + b] = h[b * p + a];
            }
        }
        for j in 1..p {
            h[j * p + j] += opts.lambda;
        }
        let l = cholesky(&h, p)
            .ok_or_else(|| GlmError::Singular("logistic Newton system".into()))?;
        let direction = cholesky_solve(&l, p, &g);

        let current = *trace.last().unwrap();
        // Predicted decrease of a full Newton step. Once it falls below
        // the rounding noise of the objective (a sum of n terms), a line
        // search cannot certify progress; take the pure step and let the
        // gradient test terminate — this is the quadratic basin.
        let decrement = 0.5 * dot(&g, &direction);
        let noise = 1e-12 * (1.0 + current.abs());
        if decrement.abs() <= noise {
            for (b, d) in beta.iter_mut().zip(&direction) {
                *b -= d;
            }
            trace.push(logistic_penalized_objective(&beta, &xs, y, Some(&w), opts.lambda));
            continue;
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate: Vec<f64> = beta
                .iter()
                .zip(&direction)
                .map(|(b, d)| b - step * d)
                .collect();
            let obj = logistic_penalized_objective(&candidate, &xs, y, Some(&w), opts.lambda);
            if obj <= current && obj.is_finite() {
                beta = candidate;
                trace.push(obj);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no certifiable descent at working precision; stop here
            break;
        }
    }
    if !converged {
        let g = logistic_penalized_gradient(&beta, &xs, y, Some(&w), opts.lambda)?;
        grad_norm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        converged = grad_norm < opts.tol;
    }

    let coefficients = match &standardization {
        Some(s) => unstandardize(&beta, &s.means, &s.scales),
        None => beta.clone(),
    };
    Ok(GlmFit {
        family: Family::Logistic,
        coefficients: vec![coefficients],
        std_coefficients: vec![beta],
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

#[cfg(test)]
mod tests {
    use super::*;

    fn design_1d(xcol: &[f64]) -> DesignMatrix {
        let n = xcol.len();
        let mut data = Vec::with_capacity(2 * n);
        for &v in xcol {
            data.push(1.0);
            data.push(v);
        }
        DesignMatrix::from_raw(vec!["(intercept)".into(), "x".into()], data, n).unwrap()
    }

    #[test]
    fn constant_zero_response_gives_zero_slopes_and_low_predictions() {
        let x = design_1d(&[0.0, 1.0, 0.0, 1.0, 1.0, 0.0]);
        let y = vec![0.0; 6];
        let fit = fit_ridge_logistic(&x, &y, None, &RidgeOptions::with_lambda(1.0)).unwrap();
        assert!(fit.converged);
        assert!(fit.coefficients[0][1].abs() < 1e-8);
        assert!(fit.coefficients[0][0] < 0.0);
        for p in fit.predict_prob(&x).unwrap() {
            assert!(p < 0.5);
            assert!(p > 0.0);
        }
    }

    #[test]
    fn separable_data_stays_finite_with_penalty() {
        let x = design_1d(&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let y = vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let fit = fit_ridge_logistic(&x, &y, None, &RidgeOptions::with_lambda(1.0)).unwrap();
        assert!(fit.converged);
        assert!(fit.gradient_norm <= 1e-8);
        assert!(fit.coefficients[0].iter().all(|b| b.is_finite()));
    }

    #[test]
    fn zero_coefficients_predict_half() {
        let x = design_1d(&[0.0, 1.0]);
        let fit = GlmFit {
            family: Family::Logistic,
            coefficients: vec![vec![0.0, 0.0]],
            std_coefficients: vec![vec![0.0, 0.0]],
            standardization: None,
            lambda: 1.0,
            converged: true,
            iterations: 0,
            gradient_norm: 0.0,
            objective_trace: vec![],
            labels: x.labels().to_vec(),
            case_weights: None,
        };
        assert_eq!(fit.predict_prob(&x).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn gradient_is_zero_at_optimum() {
        let x = design_1d(&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let y = vec![0.0, 0.0, 1.0, 1.0, 1.0, 0.0];
        let fit = fit_ridge_logistic(&x, &y, None, &RidgeOptions::with_lambda(0.1)).unwrap();
        // gradient of the solver-scale objective at the solver-scale solution
        let (means, scales) = x.standardization();
        let xs = x.standardized(&means, &scales);
        let g = logistic_penalized_gradient(&fit.std_coefficients[0], &xs, &y, None, 0.1).unwrap();
        assert!(g.iter().all(|v| v.abs() <= 1e-8));
    }

    #[test]
    fn penalty_gradient_is_linear_in_lambda() {
        let x = design_1d(&[0.5, -1.0, 2.0, 0.0]);
        let y = vec![1.0, 0.0, 1.0, 0.0];
        let beta = vec![0.3, -0.7];
        let lambda = 2.5;
        let g1 = logistic_penalized_gradient(&beta, &x, &y, None, lambda).unwrap();
        let g0 = logistic_penalized_gradient(&beta, &x, &y, None, 0.0).unwrap();
        assert_eq!(g1[0] - g0[0], 0.0);
        assert_eq!(g1[1] - g0[1], lambda * beta[1]);
    }

    #[test]
    fn gradient_at_zero_matches_covariance_form() {
        // at beta = 0 every fitted probability is 1/2, so the gradient's
        // non-intercept entries are sum_i w_i x_i (1/2 - y_i)
        let xcol = [0.0, 1.0, 1.0, 0.0, 1.0, 0.0];
        let y = [0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        let w = [1.0, 2.0, 1.0, 1.5, 1.0, 1.0];
        let x = design_1d(&xcol);
        let g = logistic_penalized_gradient(&vec![0.0, 0.0], &x, &y, Some(&w), 0.7).unwrap();
        let expect: f64 = xcol
            .iter()
            .zip(&y)
            .zip(&w)
            .map(|((x, y), w)| w * x * (0.5 - y))
            .sum();
        assert!((g[1] - expect).abs() < 1e-12);
    }

    #[test]
    fn objective_trace_is_non_increasing() {
        let x = design_1d(&[0.0, 0.2, 0.4, 0.9, 1.3, 2.0, -1.0, 0.7]);
        let y = vec![0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0];
        let fit = fit_ridge_logistic(&x, &y, None, &RidgeOptions::with_lambda(0.2)).unwrap();
        for pair in fit.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
    }

    #[test]
    fn all_zero_case_weights_rejected() {
        let x = design_1d(&[0.0, 1.0]);
        let y = vec![0.0, 1.0];
        let err = fit_ridge_logistic(&x, &y, Some(&[0.0, 0.0]), &RidgeOptions::default());
        assert!(matches!(err, Err(GlmError::BadCaseWeights)));
    }

    #[test]
    fn non_binary_response_rejected() {
        let x = design_1d(&[0.0, 1.0]);
        let err = fit_ridge_logistic(&x, &[0.0, 0.3], None, &RidgeOptions::default());
        assert!(matches!(err, Err(GlmError::NonBinaryResponse(_))));
    }

    #[test]
    fn doubling_weights_and_lambda_leaves_solution_unchanged() {
        let x = design_1d(&[0.0, 0.3, 1.0, 1.4, -0.5, 0.8]);
        let y = vec![0.0, 1.0, 1.0, 1.0, 0.0, 0.0];
        let w1 = vec![1.0, 0.5, 2.0, 1.0, 1.5, 1.0];
        let w2: Vec<f64> = w1.iter().map(|v| 2.0 * v).collect();
        let f1 = fit_ridge_logistic(&x, &y, Some(&w1), &RidgeOptions::with_lambda(0.4)).unwrap();
        let f2 = fit_ridge_logistic(&x, &y, Some(&w2), &RidgeOptions::with_lambda(0.8)).unwrap();
        for (a, b) in f1.coefficients[0].iter().zip(&f2.coefficients[0]) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}

//! Damped iterative least squares (Levenberg-Marquardt) with analytic Jacobians.
//!
//! Shared by the spectral peak fitter and the measurement reductions. Fixed
//! iteration budget of 200; convergence when the relative change of the
//! residual norm drops below 1e-10.

use thiserror::Error;

pub const MAX_ITERATIONS: usize = 200;
pub const RELATIVE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("no convergence after {iterations} iterations (best residual norm {residual_norm:.6e})")]
    NoConvergence {
        iterations: usize,
        best_params: Vec<f64>,
        residual_norm: f64,
    },
    #[error("degenerate fit problem: {0}")]
    Degenerate(String),
}

/// Model interface: residuals r_i(p) = model_i(p) - data_i and the Jacobian
/// J_ij = d r_i / d p_j.
pub trait LeastSquares {
    fn residuals(&self, params: &[f64]) -> Vec<f64>;
    fn jacobian(&self, params: &[f64]) -> Vec<Vec<f64>>;
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub params: Vec<f64>,
    /// Euclidean norm of the residual vector at the optimum.
    pub residual_norm: f64,
    pub iterations: usize,
    /// 1-sigma parameter errors from the residual-weighted Jacobian at the
    /// optimum: sqrt(diag((JᵀJ)⁻¹) · SSR/(N-p)). Zero when N <= p.
    pub param_errors: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solve the symmetric system A x = b by Gaussian elimination with partial
/// pivoting. A is small (a handful of parameters).
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Some(x)
}

fn normal_matrix(jac: &[Vec<f64>], damping: f64) -> Vec<Vec<f64>> {
    let np = jac[0].len();
    let mut a = vec![vec![0.0; np]; np];
    for row in jac {
        for i in 0..np {
            for j in 0..np {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += damping * (row[i].max(1e-12));
    }
    a
}

fn gradient(jac: &[Vec<f64>], res: &[f64]) -> Vec<f64> {
    let np = jac[0].len();
    let mut g = vec![0.0; np];
    for (row, &r) in jac.iter().zip(res) {
        for j in 0..np {
            g[j] += row[j] * r;
        }
    }
    g
}

/// Run the damped least-squares iteration from `initial`.
///
/// An initial point that already has zero residual is returned unchanged with
/// `iterations == 0`.
pub fn levenberg_marquardt<M: LeastSquares>(model: &M, initial: &[f64]) -> Result<FitOutcome, FitError> {
    let mut params = initial.to_vec();
    let mut res = model.residuals(&params);
    let mut cost = norm(&res);
    if !cost.is_finite() {
        return Err(FitError::Degenerate("non-finite residual at the initial point".into()));
    }
    if cost == 0.0 {
        return Ok(finish(model, params, cost, 0));
    }

    let mut damping = 1e-3;
    for iter in 1..=MAX_ITERATIONS {
        let jac = model.jacobian(&params);
        let grad = gradient(&jac, &res);
        let mut stepped = false;
        // Try increasing damping until a step reduces the cost.
        for _ in 0..25 {
            let a = normal_matrix(&jac, damping);
            let b: Vec<f64> = grad.iter().map(|g| -g).collect();
            let Some(step) = solve(a, b) else {
                damping *= 10.0;
                continue;
            };
            let trial: Vec<f64> = params.iter().zip(&step).map(|(p, s)| p + s).collect();
            let trial_res = model.residuals(&trial);
            let trial_cost = norm(&trial_res);
            if trial_cost.is_finite() && trial_cost < cost {
                let rel_change = (cost - trial_cost) / cost.max(1e-300);
                params = trial;
                res = trial_res;
                cost = trial_cost;
                damping = (damping * 0.3).max(1e-12);
                stepped = true;
                if rel_change < RELATIVE_TOLERANCE || cost < 1e-14 {
                    return Ok(finish(model, params, cost, iter));
                }
                break;
            }
            damping *= 10.0;
        }
        if !stepped {
            // No damping level yields a downhill step: the iterate is a local
            // optimum to machine precision.
            return Ok(finish(model, params, cost, iter));
        }
    }
    Err(FitError::NoConvergence {
        iterations: MAX_ITERATIONS,
        best_params: params,
        residual_norm: cost,
    })
}

fn finish<M: LeastSquares>(model: &M, params: Vec<f64>, cost: f64, iterations: usize) -> FitOutcome {
    let errors = param_errors(model, &params, cost);
    FitOutcome {
        params,
        residual_norm: cost,
        iterations,
        param_errors: errors,
    }
}

fn param_errors<M: LeastSquares>(model: &M, params: &[f64], cost: f64) -> Vec<f64> {
    let jac = model.jacobian(params);
    let np = params.len();
    let n = jac.len();
    if n <= np {
        return vec![0.0; np];
    }
    let sigma2 = cost * cost / (n - np) as f64;
    // Invert JtJ column by column.
    let a = normal_matrix(&jac, 0.0);
    let mut diag = vec![0.0; np];
    for j in 0..np {
        let mut e = vec![0.0; np];
        e[j] = 1.0;
        match solve(a.clone(), e) {
            Some(col) => diag[j] = (col[j] * sigma2).max(0.0).sqrt(),
            None => diag[j] = 0.0,
        }
    }
    diag
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct Expo {
        ts: Vec<f64>,
        ys: Vec<f64>,
    }

    impl LeastSquares for Expo {
        fn residuals(&self, p: &[f64]) -> Vec<f64> {
            self.ts.iter().zip(&self.ys).map(|(&t, &y)| p[0] * (-t / p[1]).exp() - y).collect()
        }
        fn jacobian(&self, p: &[f64]) -> Vec<Vec<f64>> {
            self.ts
                .iter()
                .map(|&t| {
                    let e = (-t / p[1]).exp();
                    vec![e, p[0] * t * e / (p[1] * p[1])]
                })
                .collect()
        }
    }

    #[test]
    fn recovers_exponential() {
        let ts: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let ys: Vec<f64> = ts.iter().map(|&t| 3.2 * (-t / 11.0f64).exp()).collect();
        let out = levenberg_marquardt(&Expo { ts, ys }, &[1.0, 5.0]).unwrap();
        assert_relative_eq!(out.params[0], 3.2, max_relative = 1e-9);
        assert_relative_eq!(out.params[1], 11.0, max_relative = 1e-9);
    }

    #[test]
    fn zero_residual_start_is_fixed_point() {
        let ts: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = ts.iter().map(|&t| 2.0 * (-t / 7.0f64).exp()).collect();
        let out = levenberg_marquardt(&Expo { ts, ys }, &[2.0, 7.0]).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.residual_norm, 0.0);
        assert_eq!(out.params, vec![2.0, 7.0]);
    }
}

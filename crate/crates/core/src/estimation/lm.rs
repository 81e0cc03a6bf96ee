//! Levenberg-Marquardt for small dense least-squares problems.

use nalgebra::{DMatrix, DVector};

pub(crate) struct LmOutcome {
    pub params: Vec<f64>,
    pub converged: bool,
}

/// A least-squares problem: residuals `y - model(p)` and their Jacobian
/// with respect to `p` (of the model, not the residual).
pub(crate) trait LeastSquares {
    fn n_points(&self) -> usize;
    /// Writes `y_i - model_i(p)` into `r`.
    fn residuals(&self, p: &[f64], r: &mut [f64]);
    /// Row-major `d model_i / d p_j` into `jac` (`n_points x p.len()`).
    fn jacobian(&self, p: &[f64], jac: &mut DMatrix<f64>);
    /// Whether `p` lies in the admissible region.
    fn admissible(&self, p: &[f64]) -> bool;
}

pub(crate) fn levenberg_marquardt<P: LeastSquares>(
    problem: &P,
    start: &[f64],
    max_iterations: usize,
) -> LmOutcome {
    let m = problem.n_points();
    let n = start.len();
    let mut p = start.to_vec();
    let mut r = vec![0.0; m];
    problem.residuals(&p, &mut r);
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut jac = DMatrix::zeros(m, n);
    let mut lambda = 1e-3;
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; m];

    for _ in 0..max_iterations {
        if cost == 0.0 {
            return LmOutcome {
                params: p,
                converged: true,
            };
        }
        problem.jacobian(&p, &mut jac);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * DVector::from_column_slice(&r);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut h = jtj.clone();
            for i in 0..n {
                h[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(chol) = h.cholesky() else {
                lambda *= 4.0;
                continue;
            };
            let step = chol.solve(&jtr);
            for i in 0..n {
                trial[i] = p[i] + step[i];
            }
            if !problem.admissible(&trial) {
                lambda *= 4.0;
                continue;
            }
            problem.residuals(&trial, &mut r_trial);
            let trial_cost: f64 = r_trial.iter().map(|v| v * v).sum();
            if trial_cost.is_finite() && trial_cost <= cost {
                let decrease = cost - trial_cost;
                let small_step = step
                    .iter()
                    .zip(&p)
                    .all(|(s, v)| s.abs() <= 1e-12 * (v.abs() + 1e-12));
                p.copy_from_slice(&trial);
                std::mem::swap(&mut r, &mut r_trial);
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                if decrease <= 1e-14 * cost || small_step {
                    return LmOutcome {
                        params: p,
                        converged: true,
                    };
                }
                accepted = true;
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // no descent direction left: at a (possibly flat) minimum
            let gradient_small = jtr.amax() <= 1e-10 * (1.0 + cost);
            return LmOutcome {
                params: p,
                converged: gradient_small,
            };
        }
    }
    LmOutcome {
        params: p,
        converged: false,
    }
}

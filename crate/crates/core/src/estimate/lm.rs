//! Damped least squares with Marquardt diagonal scaling.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;
pub const STEP_TOLERANCE: f64 = 1e-10;
const MAX_REJECTIONS: usize = 60;

#[derive(Debug, Clone)]
pub(crate) struct LmOutcome {
    pub params: Vec<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub jtj: DMatrix<f64>,
    pub n_residuals: usize,
    pub iterations: usize,
}

impl LmOutcome {
    /// s²(JᵀJ)⁻¹ with s² the reduced χ².
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        let dof = self.n_residuals as f64 - self.params.len() as f64;
        if dof <= 0.0 {
            return Err(Error::InvalidDataset(format!(
                "{} points cannot constrain {} parameters",
                self.n_residuals,
                self.params.len()
            )));
        }
        let inv = self.jtj.clone().try_inverse().ok_or(Error::FitFailure {
            iterations: self.iterations,
            cost: self.cost,
            lambda: f64::NAN,
        })?;
        Ok(inv * (self.cost / dof))
    }

    pub fn reduced_chi2(&self) -> f64 {
        self.cost / (self.n_residuals as f64 - self.params.len() as f64)
    }
}

/// Minimises ‖r(x)‖². `model` returns the residual vector and its Jacobian.
pub(crate) fn levenberg_marquardt<F>(x0: &[f64], model: F) -> Result<LmOutcome>
where
    F: Fn(&[f64]) -> (DVector<f64>, DMatrix<f64>),
{
    let mut x = DVector::from_column_slice(x0);
    let (mut r, mut j) = model(x.as_slice());
    let mut cost = r.norm_squared();
    if !cost.is_finite() {
        return Err(Error::FitInitialisation(
            "model is not finite at the starting point".into(),
        ));
    }
    let mut lambda = 1e-3;

    for iteration in 1..=MAX_ITERATIONS {
        let jtj = j.transpose() * &j;
        let grad = j.transpose() * &r;
        if cost == 0.0 || grad.amax() == 0.0 {
            return Ok(outcome(x, cost, jtj, r.len(), iteration));
        }
        let mut rejections = 0;
        loop {
            let mut damped = jtj.clone();
            for i in 0..damped.nrows() {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let step = damped.cholesky().map(|ch| ch.solve(&(-&grad)));
            let Some(step) = step else {
                lambda *= 10.0;
                rejections += 1;
                if rejections > MAX_REJECTIONS {
                    return Err(Error::FitFailure {
                        iterations: iteration,
                        cost,
                        lambda,
                    });
                }
                continue;
            };
            let small = step.norm() <= STEP_TOLERANCE * (x.norm() + STEP_TOLERANCE);
            let trial = &x + &step;
            let (r_new, j_new) = model(trial.as_slice());
            let cost_new = r_new.norm_squared();
            if cost_new.is_finite() && cost_new <= cost {
                x = trial;
                r = r_new;
                j = j_new;
                cost = cost_new;
                lambda = (lambda / 10.0).max(1e-15);
                if small {
                    let jtj = j.transpose() * &j;
                    return Ok(outcome(x, cost, jtj, r.len(), iteration));
                }
                break;
            }
            if small {
                return Ok(outcome(x, cost, jtj, r.len(), iteration));
            }
            lambda *= 10.0;
            rejections += 1;
            if rejections > MAX_REJECTIONS {
                return Err(Error::FitFailure {
                    iterations: iteration,
                    cost,
                    lambda,
                });
            }
        }
    }
    Err(Error::FitFailure {
        iterations: MAX_ITERATIONS,
        cost,
        lambda,
    })
}

fn outcome(
    x: DVector<f64>,
    cost: f64,
    jtj: DMatrix<f64>,
    n: usize,
    iterations: usize,
) -> LmOutcome {
    LmOutcome {
        params: x.iter().copied().collect(),
        cost,
        jtj,
        n_residuals: n,
        iterations,
    }
}

use nalgebra::{DMatrix, DVector};
use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// L2-regularized logistic regression.
///
/// The objective is the mean log-loss plus `l2 / (2n) · ‖w‖²`, which is the
/// `C = 1 / l2` convention of the usual liblinear/lbfgs solvers rescaled by
/// `1/n`. The intercept is not penalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub max_iters: usize,
    /// Stop once the gradient's Euclidean norm drops below this.
    pub tolerance: f64,
    pub l2: f64,
    pub fit_intercept: bool,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            max_iters: 500,
            tolerance: 1e-6,
            l2: 1.0,
            fit_intercept: true,
        }
    }
}

impl LogisticParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0
            || self.tolerance.is_nan()
            || self.tolerance <= 0.0
            || self.l2.is_nan()
            || self.l2 < 0.0
        {
            return Err(Error::Input(format!(
                "invalid logistic hyperparameters {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Objective value before the first step and after each accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticTrace {
    pub losses: Vec<f64>,
    pub gradient_norm: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

struct Problem<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [u8],
    l2: f64,
    intercept: bool,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        self.x.ncols() + usize::from(self.intercept)
    }

    fn margin(&self, theta: &DVector<f64>, i: usize) -> f64 {
        let m = self.x.ncols();
        let mut z = if self.intercept { theta[m] } else { 0.0 };
        for (j, v) in self.x.row(i).iter().enumerate() {
            z += theta[j] * v;
        }
        z
    }

    fn loss(&self, theta: &DVector<f64>) -> f64 {
        let n = self.y.len() as f64;
        let data: f64 = (0..self.y.len())
            .map(|i| {
                let z = self.margin(theta, i);
                softplus(z) - f64::from(self.y[i]) * z
            })
            .sum();
        let penalty: f64 = (0..self.x.ncols()).map(|j| theta[j] * theta[j]).sum();
        (data + 0.5 * self.l2 * penalty) / n
    }

    fn gradient_hessian(&self, theta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let m = self.x.ncols();
        let d = self.dim();
        let n = self.y.len() as f64;
        let mut grad = DVector::zeros(d);
        let mut hess = DMatrix::zeros(d, d);
        let mut row = vec![0.0; d];
        for i in 0..self.y.len() {
            for (j, v) in self.x.row(i).iter().enumerate() {
                row[j] = *v;
            }
            if self.intercept {
                row[m] = 1.0;
            }
            let p = sigmoid(self.margin(theta, i));
            let r = p - f64::from(self.y[i]);
            let w = p * (1.0 - p);
            for a in 0..d {
                grad[a] += r * row[a];
                for b in 0..=a {
                    hess[(a, b)] += w * row[a] * row[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                hess[(b, a)] = hess[(a, b)];
            }
        }
        for j in 0..m {
            grad[j] += self.l2 * theta[j];
            hess[(j, j)] += self.l2;
        }
        (grad / n, hess / n)
    }
}

impl LogisticModel {
    /// Damped Newton iterations with Armijo backtracking; falls back to the
    /// steepest-descent direction when the Hessian is not positive definite.
    /// Every accepted step lowers the objective.
    pub fn fit(
        x: ArrayView2<'_, f64>,
        y: &[u8],
        params: &LogisticParams,
    ) -> Result<(Self, LogisticTrace)> {
        params.validate()?;
        if x.nrows() != y.len() || y.is_empty() {
            return Err(Error::Input(format!(
                "{} rows but {} labels",
                x.nrows(),
                y.len()
            )));
        }
        let problem = Problem {
            x,
            y,
            l2: params.l2,
            intercept: params.fit_intercept,
        };
        let mut theta = DVector::zeros(problem.dim());
        let mut loss = problem.loss(&theta);
        let mut losses = vec![loss];
        let mut iterations = 0;
        let mut converged = false;
        let mut grad_norm = f64::INFINITY;

        while iterations < params.max_iters {
            let (grad, hess) = problem.gradient_hessian(&theta);
            grad_norm = grad.norm();
            if grad_norm < params.tolerance {
                converged = true;
                break;
            }
            let direction = match hess.cholesky() {
                Some(chol) => chol.solve(&grad),
                None => grad.clone(),
            };
            let slope = grad.dot(&direction);
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let candidate = &theta - &direction * step;
                let candidate_loss = problem.loss(&candidate);
                if candidate_loss <= loss - 1e-4 * step * slope {
                    accepted = Some((candidate, candidate_loss));
                    break;
                }
                step *= 0.5;
            }
            iterations += 1;
            match accepted {
                Some((next, next_loss)) => {
                    theta = next;
                    loss = next_loss;
                    losses.push(loss);
                }
                // No representable decrease left: we are at the optimum to machine precision.
                None => {
                    converged = true;
                    break;
                }
            }
        }

        let m = x.ncols();
        let model = LogisticModel {
            weights: theta.iter().take(m).copied().collect(),
            intercept: if params.fit_intercept { theta[m] } else { 0.0 },
            iterations,
            converged,
        };
        Ok((
            model,
            LogisticTrace {
                losses,
                gradient_norm: grad_norm,
            },
        ))
    }

    pub fn proba(&self, x: ArrayView1<'_, f64>) -> f64 {
        let z = self.intercept
            + self
                .weights
                .iter()
                .zip(x.iter())
                .map(|(w, v)| w * v)
                .sum::<f64>();
        sigmoid(z)
    }
}

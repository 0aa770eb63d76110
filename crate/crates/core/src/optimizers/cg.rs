//! Nonlinear conjugate gradient with the Fletcher-Reeves update and
//! forward-difference gradients. One iteration is one line-search step.

use super::gradient::scaled_gradient;
use super::line_search::armijo;
use super::{dot, inf_norm, Objective, Progress};
use crate::problems::ProblemError;

#[derive(Debug, Clone)]
pub(crate) struct ConjugateGradient {
    x: Vec<f64>,
    fx: f64,
    grad: Vec<f64>,
    dir: Vec<f64>,
    since_restart: usize,
    gtol: f64,
    c1: f64,
}

impl ConjugateGradient {
    pub fn init(obj: &mut Objective<'_>, x0: &[f64], gtol: f64, c1: f64) -> Result<Self, ProblemError> {
        let fx = obj.eval(x0)?;
        let grad = scaled_gradient(obj, x0, fx)?;
        let dir = grad.iter().map(|g| -g).collect();
        Ok(Self { x: x0.to_vec(), fx, grad, dir, since_restart: 0, gtol, c1 })
    }

    pub fn step(&mut self, obj: &mut Objective<'_>) -> Result<Progress, ProblemError> {
        let k = self.x.len();
        if dot(&self.grad, &self.dir) >= 0.0 {
            self.dir = self.grad.iter().map(|g| -g).collect();
            self.since_restart = 0;
        }
        let Some(accepted) = armijo(obj, &self.x, self.fx, &self.grad, &self.dir, self.c1)? else {
            return Ok(Progress::Converged);
        };
        let grad = scaled_gradient(obj, &accepted.x, accepted.fx)?;
        self.x = accepted.x;
        self.fx = accepted.fx;
        if inf_norm(&grad) < self.gtol {
            self.grad = grad;
            return Ok(Progress::Converged);
        }
        self.since_restart += 1;
        let beta = dot(&grad, &grad) / dot(&self.grad, &self.grad);
        if self.since_restart >= k || !beta.is_finite() {
            self.dir = grad.iter().map(|g| -g).collect();
            self.since_restart = 0;
        } else {
            for (d, g) in self.dir.iter_mut().zip(&grad) {
                *d = -g + beta * *d;
            }
        }
        self.grad = grad;
        Ok(Progress::Continue)
    }
}

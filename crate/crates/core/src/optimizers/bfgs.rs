//! Quasi-Newton BFGS on the inverse Hessian with forward-difference
//! gradients. One iteration is one line-search step.

use nalgebra::{DMatrix, DVector};

use super::gradient::scaled_gradient;
use super::line_search::armijo;
use super::{inf_norm, Objective, Progress};
use crate::problems::ProblemError;

const CURVATURE_GUARD: f64 = 1e-10;

#[derive(Debug, Clone)]
pub(crate) struct Bfgs {
    x: Vec<f64>,
    fx: f64,
    grad: Vec<f64>,
    inv_hessian: DMatrix<f64>,
    gtol: f64,
    c1: f64,
}

impl Bfgs {
    pub fn init(obj: &mut Objective<'_>, x0: &[f64], gtol: f64, c1: f64) -> Result<Self, ProblemError> {
        let k = x0.len();
        let fx = obj.eval(x0)?;
        let grad = scaled_gradient(obj, x0, fx)?;
        Ok(Self { x: x0.to_vec(), fx, grad, inv_hessian: DMatrix::identity(k, k), gtol, c1 })
    }

    pub fn inverse_hessian(&self) -> Vec<f64> {
        self.inv_hessian.transpose().as_slice().to_vec()
    }

    pub fn step(&mut self, obj: &mut Objective<'_>) -> Result<Progress, ProblemError> {
        let k = self.x.len();
        let g = DVector::from_column_slice(&self.grad);
        let mut dir = -(&self.inv_hessian * &g);
        if g.dot(&dir) >= 0.0 {
            self.inv_hessian = DMatrix::identity(k, k);
            dir = -g.clone();
        }
        let Some(accepted) = armijo(obj, &self.x, self.fx, &self.grad, dir.as_slice(), self.c1)? else {
            return Ok(Progress::Converged);
        };
        let new_grad = scaled_gradient(obj, &accepted.x, accepted.fx)?;
        let s = DVector::from_iterator(k, accepted.x.iter().zip(&self.x).map(|(a, b)| a - b));
        let y = DVector::from_column_slice(&new_grad) - &g;
        let sy = s.dot(&y);
        if sy > CURVATURE_GUARD * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(k, k);
            let left = &eye - rho * &s * y.transpose();
            let right = &eye - rho * &y * s.transpose();
            self.inv_hessian = left * &self.inv_hessian * right + rho * &s * s.transpose();
        }
        self.x = accepted.x;
        self.fx = accepted.fx;
        self.grad = new_grad;
        if inf_norm(&self.grad) < self.gtol {
            return Ok(Progress::Converged);
        }
        if self.inv_hessian.iter().any(|v| !v.is_finite()) {
            return Ok(Progress::Failed);
        }
        Ok(Progress::Continue)
    }
}

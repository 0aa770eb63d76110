//! Downhill simplex. One iteration is one simplex update: reflection,
//! expansion, contraction or shrink.

use super::{Objective, Progress};
use crate::problems::ProblemError;

const RHO: f64 = 1.0;
const CHI: f64 = 2.0;
const PSI: f64 = 0.5;
const SIGMA: f64 = 0.5;
const NONZERO_DELTA: f64 = 0.05;
const ZERO_DELTA: f64 = 0.00025;

#[derive(Debug, Clone)]
pub(crate) struct NelderMead {
    // vertices kept sorted by value, best first
    sim: Vec<Vec<f64>>,
    fsim: Vec<f64>,
    xatol: f64,
    fatol: f64,
}

impl NelderMead {
    pub fn init(obj: &mut Objective<'_>, x0: &[f64], xatol: f64, fatol: f64) -> Result<Self, ProblemError> {
        let k = x0.len();
        let mut sim = Vec::with_capacity(k + 1);
        let mut fsim = Vec::with_capacity(k + 1);
        fsim.push(obj.eval(x0)?);
        sim.push(x0.to_vec());
        for i in 0..k {
            let mut y = x0.to_vec();
            y[i] = if y[i] != 0.0 { (1.0 + NONZERO_DELTA) * y[i] } else { ZERO_DELTA };
            fsim.push(obj.eval(&y)?);
            sim.push(y);
        }
        let mut nm = Self { sim, fsim, xatol, fatol };
        nm.sort();
        Ok(nm)
    }

    fn sort(&mut self) {
        let mut order: Vec<usize> = (0..self.sim.len()).collect();
        order.sort_by(|&a, &b| self.fsim[a].total_cmp(&self.fsim[b]));
        self.sim = order.iter().map(|&i| self.sim[i].clone()).collect();
        self.fsim = order.iter().map(|&i| self.fsim[i]).collect();
    }

    fn converged(&self) -> bool {
        let best = &self.sim[0];
        let size = self.sim[1..]
            .iter()
            .flat_map(|v| v.iter().zip(best).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        let spread = self.fsim[1..].iter().map(|f| (f - self.fsim[0]).abs()).fold(0.0f64, f64::max);
        size < self.xatol && spread < self.fatol
    }

    pub fn step(&mut self, obj: &mut Objective<'_>) -> Result<Progress, ProblemError> {
        let k = self.sim.len() - 1;
        let xbar: Vec<f64> = (0..k)
            .map(|j| self.sim[..k].iter().map(|v| v[j]).sum::<f64>() / k as f64)
            .collect();
        let worst = self.sim[k].clone();
        let along = |t: f64| -> Vec<f64> { xbar.iter().zip(&worst).map(|(b, w)| b + t * (b - w)).collect() };

        let xr = along(RHO);
        let fr = obj.eval(&xr)?;
        let mut shrink = false;
        if fr < self.fsim[0] {
            let xe = along(RHO * CHI);
            let fe = obj.eval(&xe)?;
            if fe < fr {
                self.replace_worst(xe, fe);
            } else {
                self.replace_worst(xr, fr);
            }
        } else if fr < self.fsim[k - 1] {
            self.replace_worst(xr, fr);
        } else if fr < self.fsim[k] {
            let xc = along(PSI * RHO);
            let fc = obj.eval(&xc)?;
            if fc <= fr {
                self.replace_worst(xc, fc);
            } else {
                shrink = true;
            }
        } else {
            let xcc = along(-PSI);
            let fcc = obj.eval(&xcc)?;
            if fcc < self.fsim[k] {
                self.replace_worst(xcc, fcc);
            } else {
                shrink = true;
            }
        }
        if shrink {
            let best = self.sim[0].clone();
            for j in 1..=k {
                let v: Vec<f64> = best.iter().zip(&self.sim[j]).map(|(b, s)| b + SIGMA * (s - b)).collect();
                self.fsim[j] = obj.eval(&v)?;
                self.sim[j] = v;
            }
        }
        self.sort();
        Ok(if self.converged() { Progress::Converged } else { Progress::Continue })
    }

    fn replace_worst(&mut self, x: Vec<f64>, fx: f64) {
        let k = self.sim.len() - 1;
        self.sim[k] = x;
        self.fsim[k] = fx;
    }
}

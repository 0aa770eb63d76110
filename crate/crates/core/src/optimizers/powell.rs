//! Powell's conjugate direction method. One iteration is a full cycle of
//! line minimizations through the direction set, followed by the optional
//! replacement of the direction of largest decrease.

use super::line_search::{bracket, brent, Line, LineError};
use super::{Objective, Progress};
use crate::problems::ProblemError;

#[derive(Debug, Clone)]
pub(crate) struct Powell {
    x: Vec<f64>,
    fx: f64,
    directions: Vec<Vec<f64>>,
    xtol: f64,
    ftol: f64,
}

enum Minimized {
    Moved { fval: f64, x: Vec<f64>, step: Vec<f64> },
    Broken,
}

impl Powell {
    pub fn init(obj: &mut Objective<'_>, x0: &[f64], xtol: f64, ftol: f64) -> Result<Self, ProblemError> {
        let k = x0.len();
        let fx = obj.eval(x0)?;
        let directions = (0..k)
            .map(|i| {
                let mut d = vec![0.0; k];
                d[i] = 1.0;
                d
            })
            .collect();
        Ok(Self { x: x0.to_vec(), fx, directions, xtol, ftol })
    }

    fn line_minimize(
        &self,
        obj: &mut Objective<'_>,
        x: &[f64],
        fx: f64,
        dir: &[f64],
    ) -> Result<Minimized, ProblemError> {
        let mut line = Line::new(obj, x, dir);
        let found = bracket(&mut line, fx).and_then(|br| brent(&mut line, br, self.xtol));
        match found {
            Ok((alpha, fval)) => {
                if fval > fx {
                    // brent never returns a worse point than the bracket midpoint,
                    // which is at least as good as the origin
                    return Ok(Minimized::Broken);
                }
                let step: Vec<f64> = dir.iter().map(|d| alpha * d).collect();
                let x = x.iter().zip(&step).map(|(a, s)| a + s).collect();
                Ok(Minimized::Moved { fval, x, step })
            }
            Err(LineError::Problem(e)) => Err(e),
            Err(LineError::NoBracket) => Ok(Minimized::Broken),
        }
    }

    pub fn step(&mut self, obj: &mut Objective<'_>) -> Result<Progress, ProblemError> {
        let k = self.x.len();
        let fx_start = self.fx;
        let x_start = self.x.clone();
        let mut biggest = 0;
        let mut delta = 0.0;
        for i in 0..k {
            let before = self.fx;
            match self.line_minimize(obj, &self.x, self.fx, &self.directions[i])? {
                Minimized::Moved { fval, x, step } => {
                    self.fx = fval;
                    self.x = x;
                    self.directions[i] = step;
                }
                Minimized::Broken => return Ok(Progress::Failed),
            }
            if before - self.fx > delta {
                delta = before - self.fx;
                biggest = i;
            }
        }
        if 2.0 * (fx_start - self.fx) <= self.ftol * (fx_start.abs() + self.fx.abs()) + 1e-20 {
            return Ok(Progress::Converged);
        }
        let direction: Vec<f64> = self.x.iter().zip(&x_start).map(|(a, b)| a - b).collect();
        let extrapolated: Vec<f64> = self.x.iter().zip(&x_start).map(|(a, b)| 2.0 * a - b).collect();
        let fx2 = obj.eval(&extrapolated)?;
        if fx_start > fx2 {
            let mut t = 2.0 * (fx_start + fx2 - 2.0 * self.fx);
            let temp = fx_start - self.fx - delta;
            t *= temp * temp;
            let temp = fx_start - fx2;
            t -= delta * temp * temp;
            if t < 0.0 {
                match self.line_minimize(obj, &self.x, self.fx, &direction)? {
                    Minimized::Moved { fval, x, step } => {
                        self.fx = fval;
                        self.x = x;
                        self.directions[biggest] = self.directions[k - 1].clone();
                        self.directions[k - 1] = step;
                    }
                    Minimized::Broken => return Ok(Progress::Failed),
                }
            }
        }
        Ok(Progress::Continue)
    }
}

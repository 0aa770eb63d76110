//! One-dimensional searches shared by the gradient and direction-set methods.

use super::{dot, Objective};
use crate::problems::ProblemError;

const MAX_HALVINGS: usize = 60;

/// Accepted point of an Armijo backtracking search.
pub(crate) struct ArmijoStep {
    #[cfg_attr(not(test), allow(dead_code))]
    pub alpha: f64,
    pub x: Vec<f64>,
    pub fx: f64,
}

/// Backtracking from a unit step, halving until
/// `f(x + a d) <= f(x) + c1 a g.d`. `Ok(None)` when no acceptable step exists
/// within the halving limit.
pub(crate) fn armijo(
    obj: &mut Objective<'_>,
    x: &[f64],
    fx: f64,
    grad: &[f64],
    dir: &[f64],
    c1: f64,
) -> Result<Option<ArmijoStep>, ProblemError> {
    let slope = dot(grad, dir);
    let mut alpha = 1.0;
    let mut trial = vec![0.0; x.len()];
    for _ in 0..MAX_HALVINGS {
        for ((t, xi), di) in trial.iter_mut().zip(x).zip(dir) {
            *t = xi + alpha * di;
        }
        if trial.iter().zip(x).all(|(t, xi)| t == xi) {
            // step too small to move any coordinate
            return Ok(None);
        }
        let ft = obj.eval(&trial)?;
        if ft <= fx + c1 * alpha * slope {
            return Ok(Some(ArmijoStep { alpha, x: trial, fx: ft }));
        }
        alpha *= 0.5;
    }
    Ok(None)
}

/// Objective restricted to the line `x + a d`.
pub(crate) struct Line<'o, 'a> {
    obj: &'o mut Objective<'a>,
    origin: &'o [f64],
    dir: &'o [f64],
    buf: Vec<f64>,
}

impl<'o, 'a> Line<'o, 'a> {
    pub fn new(obj: &'o mut Objective<'a>, origin: &'o [f64], dir: &'o [f64]) -> Self {
        let buf = vec![0.0; origin.len()];
        Self { obj, origin, dir, buf }
    }

    fn at(&mut self, a: f64) -> Result<f64, ProblemError> {
        for ((b, o), d) in self.buf.iter_mut().zip(self.origin).zip(self.dir) {
            *b = o + a * d;
        }
        self.obj.eval(&self.buf)
    }
}

#[derive(Debug, Clone, Copy)]
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) struct Bracket {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub fa: f64,
    pub fb: f64,
    pub fc: f64,
}

#[derive(Debug)]
pub(crate) enum LineError {
    Problem(ProblemError),
    /// Bracket expansion did not terminate.
    NoBracket,
}

impl From<ProblemError> for LineError {
    fn from(e: ProblemError) -> Self {
        LineError::Problem(e)
    }
}

const GOLD: f64 = 1.618034;
const GROW_LIMIT: f64 = 110.0;
const VERY_SMALL: f64 = 1e-21;
const BRACKET_MAX_ITER: usize = 1000;

/// Downhill bracket search from `[0, 1]` with parabolic extrapolation.
/// `f0` is the known value at `a = 0`.
pub(crate) fn bracket(line: &mut Line<'_, '_>, f0: f64) -> Result<Bracket, LineError> {
    let (mut xa, mut xb) = (0.0, 1.0);
    let mut fa = f0;
    let mut fb = line.at(xb)?;
    if fa < fb {
        std::mem::swap(&mut xa, &mut xb);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut xc = xb + GOLD * (xb - xa);
    let mut fc = line.at(xc)?;
    let mut iter = 0;
    while fc < fb {
        let tmp1 = (xb - xa) * (fb - fc);
        let tmp2 = (xb - xc) * (fb - fa);
        let val = tmp2 - tmp1;
        let denom = if val.abs() < VERY_SMALL { 2.0 * VERY_SMALL } else { 2.0 * val };
        let mut w = xb - ((xb - xc) * tmp2 - (xb - xa) * tmp1) / denom;
        let wlim = xb + GROW_LIMIT * (xc - xb);
        if iter > BRACKET_MAX_ITER {
            return Err(LineError::NoBracket);
        }
        iter += 1;
        let mut fw;
        if (w - xc) * (xb - w) > 0.0 {
            fw = line.at(w)?;
            if fw < fc {
                return Ok(Bracket { a: xb, b: w, c: xc, fa: fb, fb: fw, fc });
            } else if fw > fb {
                return Ok(Bracket { a: xa, b: xb, c: w, fa, fb, fc: fw });
            }
            w = xc + GOLD * (xc - xb);
            fw = line.at(w)?;
        } else if (w - wlim) * (wlim - xc) >= 0.0 {
            w = wlim;
            fw = line.at(w)?;
        } else if (w - wlim) * (xc - w) > 0.0 {
            fw = line.at(w)?;
            if fw < fc {
                xb = xc;
                xc = w;
                w = xc + GOLD * (xc - xb);
                fb = fc;
                fc = fw;
                fw = line.at(w)?;
            }
        } else {
            w = xc + GOLD * (xc - xb);
            fw = line.at(w)?;
        }
        xa = xb;
        xb = xc;
        xc = w;
        fa = fb;
        fb = fc;
        fc = fw;
    }
    Ok(Bracket { a: xa, b: xb, c: xc, fa, fb, fc })
}

const CGOLD: f64 = 0.381_966_0;
const MIN_TOL: f64 = 1e-11;
const BRENT_MAX_ITER: usize = 500;

/// Brent's parabolic/golden minimization inside a bracket. Returns the
/// abscissa and value of the best point.
pub(crate) fn brent(line: &mut Line<'_, '_>, br: Bracket, tol: f64) -> Result<(f64, f64), LineError> {
    let (mut a, mut b) = if br.a < br.c { (br.a, br.c) } else { (br.c, br.a) };
    let (mut x, mut w, mut v) = (br.b, br.b, br.b);
    let (mut fx, mut fw, mut fv) = (br.fb, br.fb, br.fb);
    let mut deltax: f64 = 0.0;
    let mut rat: f64 = 0.0;
    for _ in 0..BRENT_MAX_ITER {
        let tol1 = tol * x.abs() + MIN_TOL;
        let tol2 = 2.0 * tol1;
        let xmid = 0.5 * (a + b);
        if (x - xmid).abs() < tol2 - 0.5 * (b - a) {
            break;
        }
        if deltax.abs() <= tol1 {
            deltax = if x >= xmid { a - x } else { b - x };
            rat = CGOLD * deltax;
        } else {
            let tmp1 = (x - w) * (fx - fv);
            let mut tmp2 = (x - v) * (fx - fw);
            let mut p = (x - v) * tmp2 - (x - w) * tmp1;
            tmp2 = 2.0 * (tmp2 - tmp1);
            if tmp2 > 0.0 {
                p = -p;
            }
            tmp2 = tmp2.abs();
            let dx_temp = deltax;
            deltax = rat;
            if p > tmp2 * (a - x) && p < tmp2 * (b - x) && p.abs() < (0.5 * tmp2 * dx_temp).abs() {
                rat = p / tmp2;
                let u = x + rat;
                if (u - a) < tol2 || (b - u) < tol2 {
                    rat = if xmid - x >= 0.0 { tol1 } else { -tol1 };
                }
            } else {
                deltax = if x >= xmid { a - x } else { b - x };
                rat = CGOLD * deltax;
            }
        }
        let u = if rat.abs() < tol1 {
            if rat >= 0.0 {
                x + tol1
            } else {
                x - tol1
            }
        } else {
            x + rat
        };
        let fu = line.at(u)?;
        if fu > fx {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                w = u;
                fv = fw;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        } else {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            w = x;
            x = u;
            fv = fw;
            fw = fx;
            fx = fu;
        }
    }
    Ok((x, fx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::Incumbent;
    use crate::problems::{ProblemId, ProblemInstance};
    use nalgebra::DMatrix;

    fn centered_sphere() -> ProblemInstance {
        ProblemInstance::with_transform(ProblemId::new(1).unwrap(), vec![3.0, 0.0], 0.0, DMatrix::identity(2, 2))
            .unwrap()
    }

    #[test]
    fn brent_finds_parabola_minimum() {
        let mut inst = centered_sphere();
        let mut inc = Incumbent::new(2);
        let mut obj = Objective::new(&mut inst, &mut inc);
        let origin = [0.0, 0.0];
        let dir = [1.0, 0.0];
        let f0 = obj.eval(&origin).unwrap();
        let mut line = Line::new(&mut obj, &origin, &dir);
        let br = bracket(&mut line, f0).unwrap();
        assert!(br.fb <= br.fa && br.fb <= br.fc);
        let (a, fa) = brent(&mut line, br, 1e-11).unwrap();
        assert!((a - 3.0).abs() < 1e-8, "{a}");
        assert!(fa < 1e-15);
    }

    #[test]
    fn armijo_halves_overshoot() {
        let mut inst = centered_sphere();
        let mut inc = Incumbent::new(2);
        let mut obj = Objective::new(&mut inst, &mut inc);
        let x = [0.0, 0.0];
        let fx = obj.eval(&x).unwrap();
        // gradient of (x-3)^2 at 0 is -6; unit step along 6 lands on 6 (same value)
        let g = [-6.0, 0.0];
        let d = [6.0, 0.0];
        let s = armijo(&mut obj, &x, fx, &g, &d, 1e-4).unwrap().unwrap();
        assert_eq!(s.alpha, 0.5);
        assert_eq!(s.x, vec![3.0, 0.0]);
        assert_eq!(s.fx, 0.0);
    }
}

//! Forward-difference gradients.

use super::{Objective, OptimizerError};
use crate::problems::{ProblemError, ProblemInstance};

/// Relative step used by the gradient-based optimizers.
pub(crate) const REL_STEP: f64 = 1e-8;

/// Forward-difference gradient `(f(x + h e_i) - f(x)) / h` with a fixed step.
/// Costs `k + 1` counted evaluations.
pub fn fd_gradient(instance: &mut ProblemInstance, x: &[f64], h: f64) -> Result<Vec<f64>, OptimizerError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(OptimizerError::InvalidParam(format!("difference step must be positive, got {h}")));
    }
    if x.len() != instance.dim() {
        return Err(OptimizerError::Dimension { expected: instance.dim(), got: x.len() });
    }
    let fx = instance.evaluate(x)?;
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let step = probe[i] - x[i];
        grad.push((instance.evaluate(&probe)? - fx) / step);
        probe[i] = x[i];
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(ProblemError::NonFinite.into());
    }
    Ok(grad)
}

/// Gradient at a point whose value is already known; `k` evaluations with
/// per-coordinate step `1e-8 * max(1, |x_i|)`. Non-finite components surface
/// as [`ProblemError::NonFinite`].
pub(crate) fn scaled_gradient(obj: &mut Objective<'_>, x: &[f64], fx: f64) -> Result<Vec<f64>, ProblemError> {
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + REL_STEP * x[i].abs().max(1.0);
        let step = probe[i] - x[i];
        let g = (obj.eval(&probe)? - fx) / step;
        if !g.is_finite() {
            return Err(ProblemError::NonFinite);
        }
        grad.push(g);
        probe[i] = x[i];
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::ProblemId;

    #[test]
    fn sphere_gradient_matches_analytic() {
        let mut inst = ProblemInstance::new(ProblemId::new(1).unwrap(), 2, 1).unwrap();
        let x: Vec<f64> = inst.x_opt().iter().zip([1.0, 2.0]).map(|(o, d)| o + d).collect();
        let g = fd_gradient(&mut inst, &x, 1e-8).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-5, "{g:?}");
        assert!((g[1] - 4.0).abs() < 1e-5, "{g:?}");
        assert_eq!(inst.eval_count(), 3);
    }

    #[test]
    fn gradient_at_optimum_is_pure_truncation_bias() {
        // forward differences of z'Az at the optimum give h * A_ii exactly
        // (plus rounding), so only the sphere is below 1e-4 in absolute terms
        let h = 1e-8;
        for f in [1u32, 2, 6, 7] {
            for dim in [2usize, 5] {
                let mut inst = ProblemInstance::new(ProblemId::new(f).unwrap(), dim, 2).unwrap();
                let x = inst.x_opt().to_vec();
                let lambda: Vec<f64> = (0..dim)
                    .map(|i| match f {
                        1 => 1.0,
                        7 => if i == 0 { 1.0 } else { 1e6 },
                        _ => 10f64.powf(6.0 * i as f64 / (dim - 1) as f64),
                    })
                    .collect();
                let r = inst.rotation().clone();
                let g = fd_gradient(&mut inst, &x, h).unwrap();
                for (i, gi) in g.iter().enumerate() {
                    let a_ii: f64 = (0..dim).map(|j| r[(j, i)] * r[(j, i)] * lambda[j]).sum();
                    assert!((gi - h * a_ii).abs() <= 1e-4, "f{f} d{dim} i{i}: {gi} vs {}", h * a_ii);
                }
                if f == 1 {
                    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                    assert!(norm <= 1e-4);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_step() {
        let mut inst = ProblemInstance::new(ProblemId::new(1).unwrap(), 2, 1).unwrap();
        assert!(fd_gradient(&mut inst, &[0.0, 0.0], 0.0).is_err());
        assert!(fd_gradient(&mut inst, &[0.0, 0.0], -1e-8).is_err());
        assert_eq!(inst.eval_count(), 0);
    }
}

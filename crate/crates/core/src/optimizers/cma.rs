//! (mu/mu_w, lambda) covariance matrix adaptation. One iteration is one
//! generation: sample, evaluate, then update mean, paths, covariance and
//! step size.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Objective, OptimizerError, OptimizerSpec, Progress};
use crate::problems::ProblemError;
use crate::seeding::{self, tag, StreamRng};

const MAX_CONDITION: f64 = 1e14;

/// Strategy parameters, all defaulted from the dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct CmaParams {
    pub lambda: usize,
    pub mu: usize,
    pub weights: Vec<f64>,
    pub mueff: f64,
    pub cs: f64,
    pub ds: f64,
    pub cc: f64,
    pub c1: f64,
    pub cmu: f64,
    pub chi_n: f64,
    pub sigma0: f64,
    pub tolfun: f64,
    pub tolx: f64,
}

impl CmaParams {
    /// Default population size `4 + floor(3 ln k)`.
    pub fn default_lambda(dim: usize) -> usize {
        4 + (3.0 * (dim as f64).ln()).floor() as usize
    }

    pub fn new(dim: usize, lambda: usize, sigma0: f64) -> Self {
        let n = dim as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> =
            (1..=mu).map(|i| (lambda as f64 / 2.0 + 0.5).ln() - (i as f64).ln()).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let cs = (mueff + 2.0) / (n + mueff + 5.0);
        let ds = 1.0 + 2.0 * (((mueff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + cs;
        let cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n);
        let c1 = 2.0 / ((n + 1.3).powi(2) + mueff);
        let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((n + 2.0).powi(2) + mueff));
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        Self { lambda, mu, weights, mueff, cs, ds, cc, c1, cmu, chi_n, sigma0, tolfun: 1e-11, tolx: 1e-11 }
    }

    pub(crate) fn for_spec(spec: &OptimizerSpec, dim: usize) -> Result<Self, OptimizerError> {
        let lambda = match spec.params.get("popsize") {
            Some(&p) if p.fract() != 0.0 || p < 2.0 => {
                return Err(OptimizerError::InvalidParam(format!("popsize must be an integer >= 2, got {p}")))
            }
            Some(&p) => p as usize,
            None => Self::default_lambda(dim),
        };
        let mut params = Self::new(dim, lambda, spec.param("sigma0", 2.0));
        params.tolfun = spec.param("tolfun", params.tolfun);
        params.tolx = spec.param("tolx", params.tolx);
        Ok(params)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Cma {
    p: CmaParams,
    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    basis: DMatrix<f64>,
    scales: DVector<f64>,
    path_sigma: DVector<f64>,
    path_c: DVector<f64>,
    generation: u64,
    best_history: Vec<f64>,
    rng: StreamRng,
}

impl Cma {
    pub fn new(p: CmaParams, x0: &[f64], seed: u64) -> Self {
        let n = x0.len();
        Self {
            mean: DVector::from_column_slice(x0),
            sigma: p.sigma0,
            cov: DMatrix::identity(n, n),
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
            path_sigma: DVector::zeros(n),
            path_c: DVector::zeros(n),
            generation: 0,
            best_history: Vec::new(),
            rng: seeding::stream(&[seed, tag::OPTIMIZER]),
            p,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn lambda(&self) -> usize {
        self.p.lambda
    }

    fn history_window(&self) -> usize {
        let n = self.mean.len() as f64;
        10 + (30.0 * n / self.p.lambda as f64).ceil() as usize
    }

    pub fn step(&mut self, obj: &mut Objective<'_>) -> Result<Progress, ProblemError> {
        let n = self.mean.len();
        let lambda = self.p.lambda;

        let mut offspring: Vec<(DVector<f64>, DVector<f64>)> = Vec::with_capacity(lambda);
        for _ in 0..lambda {
            let z = DVector::from_fn(n, |_, _| self.rng.sample::<f64, _>(StandardNormal));
            let y = &self.basis * z.component_mul(&self.scales);
            let x = &self.mean + self.sigma * &y;
            offspring.push((x, y));
        }
        let mut fitness = Vec::with_capacity(lambda);
        for (x, _) in &offspring {
            fitness.push(obj.eval(x.as_slice())?);
        }
        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));

        let mut y_w = DVector::zeros(n);
        for (w, &i) in self.p.weights.iter().zip(&order) {
            y_w += *w * &offspring[i].1;
        }
        self.mean += self.sigma * &y_w;

        let (cs, cc, c1, cmu, mueff) = (self.p.cs, self.p.cc, self.p.c1, self.p.cmu, self.p.mueff);
        let inv_sqrt = &self.basis
            * DMatrix::from_diagonal(&self.scales.map(|d| 1.0 / d))
            * self.basis.transpose();
        self.path_sigma = (1.0 - cs) * &self.path_sigma + (cs * (2.0 - cs) * mueff).sqrt() * (inv_sqrt * &y_w);
        let ps_norm = self.path_sigma.norm();
        let decay = 1.0 - (1.0 - cs).powi(2 * (self.generation as i32 + 1));
        let hsig = ps_norm / decay.sqrt() / self.p.chi_n < 1.4 + 2.0 / (n as f64 + 1.0);
        let hsig_f = if hsig { 1.0 } else { 0.0 };
        self.path_c = (1.0 - cc) * &self.path_c + hsig_f * (cc * (2.0 - cc) * mueff).sqrt() * &y_w;

        let mut rank_mu = DMatrix::zeros(n, n);
        for (w, &i) in self.p.weights.iter().zip(&order) {
            let y = &offspring[i].1;
            rank_mu += *w * y * y.transpose();
        }
        let rank_one = &self.path_c * self.path_c.transpose();
        self.cov = (1.0 - c1 - cmu) * &self.cov
            + c1 * (rank_one + (1.0 - hsig_f) * cc * (2.0 - cc) * &self.cov)
            + cmu * rank_mu;
        self.sigma *= ((cs / self.p.ds) * (ps_norm / self.p.chi_n - 1.0)).exp();
        self.generation += 1;

        if !self.sigma.is_finite() || self.sigma <= 0.0 || self.cov.iter().any(|v| !v.is_finite()) {
            return Ok(Progress::Failed);
        }
        // enforce symmetry before decomposing
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        if eig.eigenvalues.iter().any(|e| !e.is_finite() || *e <= 0.0) {
            return Ok(Progress::Failed);
        }
        self.cov = sym;
        self.basis = eig.eigenvectors;
        self.scales = eig.eigenvalues.map(f64::sqrt);

        let best = fitness[order[0]];
        self.best_history.push(best);
        Ok(if self.should_stop(&fitness) { Progress::Converged } else { Progress::Continue })
    }

    fn should_stop(&self, fitness: &[f64]) -> bool {
        let max_d = self.scales.max();
        let min_d = self.scales.min();
        if (max_d / min_d).powi(2) > MAX_CONDITION {
            return true;
        }
        let tolx = self.p.tolx;
        let small_steps = (0..self.mean.len())
            .all(|i| self.sigma * self.cov[(i, i)].sqrt() < tolx && self.sigma * self.path_c[i].abs() < tolx);
        if small_steps {
            return true;
        }
        let window = self.history_window();
        if self.best_history.len() >= window {
            let recent = &self.best_history[self.best_history.len() - window..];
            let (lo, hi) = recent
                .iter()
                .chain(fitness)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            if hi - lo < self.p.tolfun {
                return true;
            }
        }
        false
    }
}

//! Restart strategies that turn terminating optimizers into runs that can be
//! stepped indefinitely.
//!
//! Local methods are wrapped in basin hopping: every time the inner optimizer
//! converges the result is accepted or rejected by a fixed-temperature
//! Metropolis rule, the accepted anchor is perturbed and the local method is
//! started again. After `max_hops` hops the whole thing restarts from a fresh
//! uniform point. CMA instead restarts from a fresh uniform point whenever its
//! own termination criteria fire.

use rand::Rng;

use crate::optimizers::{Method, OptimizerError, OptimizerSpec, OptimizerState, Status, StepOutcome};
use crate::problems::ProblemInstance;
use crate::seeding::{self, tag, StreamRng};

/// Half-width of the uniform start box.
pub const START_RADIUS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopParams {
    /// Metropolis temperature; `0.0` accepts only non-worsening hops.
    pub temperature: f64,
    /// Half-width of the per-coordinate uniform perturbation.
    pub step_size: f64,
    pub max_hops: u32,
}

impl Default for HopParams {
    fn default() -> Self {
        Self { temperature: 1.0, step_size: 0.5, max_hops: 100 }
    }
}

fn uniform_start(rng: &mut StreamRng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-START_RADIUS..=START_RADIUS)).collect()
}

#[derive(Debug, Clone)]
struct GlobalBest {
    x: Vec<f64>,
    y: f64,
}

impl GlobalBest {
    fn new(dim: usize) -> Self {
        Self { x: vec![f64::NAN; dim], y: f64::INFINITY }
    }

    fn absorb(&mut self, x: &[f64], y: f64) {
        if y < self.y {
            self.y = y;
            self.x.copy_from_slice(x);
        }
    }

    fn outcome(&self, evals_used: u64, converged: bool) -> StepOutcome {
        StepOutcome { evals_used, best_x: self.x.clone(), best_y: self.y, converged }
    }
}

/// Basin-hopping wrapper around one local optimizer.
#[derive(Debug, Clone)]
pub struct HopState {
    spec: OptimizerSpec,
    params: HopParams,
    local: OptimizerState,
    local_starts: u64,
    hop_count: u32,
    restarts: u64,
    anchor_x: Vec<f64>,
    anchor_y: f64,
    best: GlobalBest,
    last_start: Vec<f64>,
    seed: u64,
    rng: StreamRng,
}

impl HopState {
    pub fn new(
        spec: &OptimizerSpec,
        instance: &mut ProblemInstance,
        seed: u64,
        params: HopParams,
    ) -> Result<Self, OptimizerError> {
        if !spec.method().is_local() {
            return Err(OptimizerError::InvalidParam(format!(
                "{} is not a local method and cannot be basin-hopped",
                spec.method()
            )));
        }
        let dim = instance.dim();
        let mut rng = seeding::stream(&[seed, tag::HOPPING]);
        let start = uniform_start(&mut rng, dim);
        let local = OptimizerState::init(spec, instance, &start, seeding::derive_seed(&[seed, 0]))?;
        let mut best = GlobalBest::new(dim);
        best.absorb(local.best_x(), local.best_y());
        Ok(Self {
            spec: spec.clone(),
            params,
            local,
            local_starts: 1,
            hop_count: 0,
            restarts: 0,
            anchor_x: vec![f64::NAN; dim],
            anchor_y: f64::INFINITY,
            best,
            last_start: start,
            seed,
            rng,
        })
    }

    pub fn hop_count(&self) -> u32 {
        self.hop_count
    }

    pub fn restarts(&self) -> u64 {
        self.restarts
    }

    pub fn anchor(&self) -> (&[f64], f64) {
        (&self.anchor_x, self.anchor_y)
    }

    pub fn global_best(&self) -> (&[f64], f64) {
        (&self.best.x, self.best.y)
    }

    /// Point the current local run was started from.
    pub fn last_start(&self) -> &[f64] {
        &self.last_start
    }

    pub fn local(&self) -> &OptimizerState {
        &self.local
    }

    pub fn params(&self) -> HopParams {
        self.params
    }

    /// Metropolis test for a finished local run. Draws from the generator only
    /// when the candidate is worse than the anchor.
    fn accepts(&mut self, y_new: f64) -> bool {
        if !y_new.is_finite() {
            return false;
        }
        if y_new <= self.anchor_y {
            return true;
        }
        if self.params.temperature <= 0.0 {
            return false;
        }
        let p = (-(y_new - self.anchor_y) / self.params.temperature).exp();
        self.rng.random::<f64>() < p
    }

    /// Advances the inner optimizer one iteration and, if it just terminated,
    /// performs one hop.
    pub fn step(&mut self, instance: &mut ProblemInstance) -> Result<StepOutcome, OptimizerError> {
        let inner = match self.local.step(instance) {
            Ok(o) => o,
            Err(OptimizerError::BudgetExhausted(partial)) => {
                self.best.absorb(&partial.best_x, partial.best_y);
                return Err(OptimizerError::BudgetExhausted(self.best.outcome(partial.evals_used, false)));
            }
            Err(e) => return Err(e),
        };
        self.best.absorb(&inner.best_x, inner.best_y);
        if self.local.status() == Status::Running {
            return Ok(self.best.outcome(inner.evals_used, false));
        }

        let (x_new, y_new) = (self.local.best_x().to_vec(), self.local.best_y());
        if self.accepts(y_new) {
            self.anchor_x = x_new;
            self.anchor_y = y_new;
        }
        self.hop_count += 1;
        let dim = instance.dim();
        let start = if self.hop_count < self.params.max_hops && self.anchor_y.is_finite() {
            let s = self.params.step_size;
            self.anchor_x.iter().map(|a| a + self.rng.random_range(-s..=s)).collect()
        } else {
            self.hop_count = 0;
            self.restarts += 1;
            self.anchor_x = vec![f64::NAN; dim];
            self.anchor_y = f64::INFINITY;
            uniform_start(&mut self.rng, dim)
        };
        let local_seed = seeding::derive_seed(&[self.seed, self.local_starts]);
        self.local_starts += 1;
        self.last_start = start;
        let before = instance.eval_count();
        match OptimizerState::init(&self.spec, instance, &self.last_start, local_seed) {
            Ok(local) => {
                self.best.absorb(local.best_x(), local.best_y());
                self.local = local;
                let used = inner.evals_used + (instance.eval_count() - before);
                Ok(self.best.outcome(used, true))
            }
            Err(OptimizerError::BudgetExhausted(partial)) => {
                self.best.absorb(&partial.best_x, partial.best_y);
                let used = inner.evals_used + partial.evals_used;
                Err(OptimizerError::BudgetExhausted(self.best.outcome(used, false)))
            }
            Err(e) => Err(e),
        }
    }
}

/// Basin hopping with the default temperature and step size.
pub fn bh_init(spec: &OptimizerSpec, instance: &mut ProblemInstance, seed: u64) -> Result<HopState, OptimizerError> {
    HopState::new(spec, instance, seed, HopParams::default())
}

pub fn bh_step(state: &mut HopState, instance: &mut ProblemInstance) -> Result<StepOutcome, OptimizerError> {
    state.step(instance)
}

/// CMA run that restarts from a fresh uniform point, with the same
/// parameters, whenever it terminates.
#[derive(Debug, Clone)]
pub struct RestartState {
    spec: OptimizerSpec,
    inner: OptimizerState,
    restarts: u64,
    best: GlobalBest,
    seed: u64,
    rng: StreamRng,
}

impl RestartState {
    pub fn new(spec: &OptimizerSpec, instance: &mut ProblemInstance, seed: u64) -> Result<Self, OptimizerError> {
        let dim = instance.dim();
        let mut rng = seeding::stream(&[seed, tag::HOPPING]);
        let start = uniform_start(&mut rng, dim);
        let inner = OptimizerState::init(spec, instance, &start, seeding::derive_seed(&[seed, 0]))?;
        let mut best = GlobalBest::new(dim);
        best.absorb(inner.best_x(), inner.best_y());
        Ok(Self { spec: spec.clone(), inner, restarts: 0, best, seed, rng })
    }

    pub fn restarts(&self) -> u64 {
        self.restarts
    }

    pub fn inner(&self) -> &OptimizerState {
        &self.inner
    }

    pub fn step(&mut self, instance: &mut ProblemInstance) -> Result<StepOutcome, OptimizerError> {
        let out = match self.inner.step(instance) {
            Ok(o) => o,
            Err(OptimizerError::BudgetExhausted(partial)) => {
                self.best.absorb(&partial.best_x, partial.best_y);
                return Err(OptimizerError::BudgetExhausted(self.best.outcome(partial.evals_used, false)));
            }
            Err(e) => return Err(e),
        };
        self.best.absorb(&out.best_x, out.best_y);
        if self.inner.status() == Status::Running {
            return Ok(self.best.outcome(out.evals_used, false));
        }
        self.restarts += 1;
        let start = uniform_start(&mut self.rng, instance.dim());
        let inner_seed = seeding::derive_seed(&[self.seed, self.restarts]);
        // CMA initialization evaluates nothing, so it cannot hit the budget
        self.inner = OptimizerState::init(&self.spec, instance, &start, inner_seed)?;
        Ok(self.best.outcome(out.evals_used, true))
    }
}

/// A run that never terminates on its own: basin hopping for local methods,
/// plain restarts for CMA.
#[derive(Debug, Clone)]
pub enum Runner {
    Hopping(HopState),
    Restarting(RestartState),
}

impl Runner {
    pub fn new(spec: &OptimizerSpec, instance: &mut ProblemInstance, seed: u64) -> Result<Self, OptimizerError> {
        if spec.method() == Method::CMA {
            RestartState::new(spec, instance, seed).map(Runner::Restarting)
        } else {
            bh_init(spec, instance, seed).map(Runner::Hopping)
        }
    }

    pub fn step(&mut self, instance: &mut ProblemInstance) -> Result<StepOutcome, OptimizerError> {
        match self {
            Runner::Hopping(h) => h.step(instance),
            Runner::Restarting(r) => r.step(instance),
        }
    }

    pub fn best(&self) -> (&[f64], f64) {
        let b = match self {
            Runner::Hopping(h) => &h.best,
            Runner::Restarting(r) => &r.best,
        };
        (&b.x, b.y)
    }
}

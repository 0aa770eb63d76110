//! Step-resumable optimizers.
//!
//! Each optimizer is an explicit state machine: [`OptimizerState::step`] runs
//! exactly one native iteration against a [`ProblemInstance`] and returns
//! control. All state, including the random generator, lives inside the
//! value, so a suspended run can be moved, cloned or dropped freely.

mod bfgs;
mod cg;
mod cma;
mod gradient;
mod line_search;
mod nelder_mead;
mod powell;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problems::{ProblemError, ProblemInstance};

pub use cma::CmaParams;
pub use gradient::fd_gradient;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    NelderMead,
    Powell,
    CG,
    BFGS,
    CMA,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::NelderMead, Method::Powell, Method::CG, Method::BFGS, Method::CMA];

    pub fn name(self) -> &'static str {
        match self {
            Method::NelderMead => "NelderMead",
            Method::Powell => "Powell",
            Method::CG => "CG",
            Method::BFGS => "BFGS",
            Method::CMA => "CMA",
        }
    }

    /// Local methods get wrapped in basin hopping; CMA runs on its own.
    pub fn is_local(self) -> bool {
        self != Method::CMA
    }

    fn param_keys(self) -> &'static [&'static str] {
        match self {
            Method::NelderMead => &["xatol", "fatol"],
            Method::Powell => &["xtol", "ftol"],
            Method::CG | Method::BFGS => &["gtol", "c1"],
            Method::CMA => &["sigma0", "popsize", "tolfun", "tolx"],
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = OptimizerError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| OptimizerError::UnknownMethod(s.to_string()))
    }
}

/// An algorithm name plus overrides of its default parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    method: Method,
    params: BTreeMap<String, f64>,
}

impl OptimizerSpec {
    pub fn new(method: Method) -> Self {
        Self { method, params: BTreeMap::new() }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Result<Self, OptimizerError> {
        if !self.method.param_keys().contains(&key) {
            return Err(OptimizerError::InvalidParam(format!(
                "{} does not accept parameter `{key}`",
                self.method
            )));
        }
        if !value.is_finite() || value <= 0.0 {
            return Err(OptimizerError::InvalidParam(format!("`{key}` must be positive, got {value}")));
        }
        self.params.insert(key.to_string(), value);
        Ok(self)
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn label(&self) -> &'static str {
        self.method.name()
    }

    fn param(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }
}

impl FromStr for OptimizerSpec {
    type Err = OptimizerError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Self::new(s.parse()?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Running,
    Converged,
    Failed,
}

/// Result of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub evals_used: u64,
    pub best_x: Vec<f64>,
    pub best_y: f64,
    pub converged: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("unknown optimizer `{0}`")]
    UnknownMethod(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("starting point has length {got}, instance dimension is {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("optimizer is not running (status {0:?})")]
    NotRunning(Status),
    /// The instance refused an evaluation mid-iteration. Carries the best
    /// point seen so far by this optimizer.
    #[error("evaluation budget exhausted")]
    BudgetExhausted(StepOutcome),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Best point evaluated by one optimizer.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Incumbent {
    pub x: Vec<f64>,
    pub y: f64,
    pub evals: u64,
}

impl Incumbent {
    fn new(dim: usize) -> Self {
        Self { x: vec![f64::NAN; dim], y: f64::INFINITY, evals: 0 }
    }
}

/// Counted access to the instance that also maintains the optimizer's own
/// incumbent.
pub(crate) struct Objective<'a> {
    inst: &'a mut ProblemInstance,
    inc: &'a mut Incumbent,
}

impl<'a> Objective<'a> {
    pub(crate) fn new(inst: &'a mut ProblemInstance, inc: &'a mut Incumbent) -> Self {
        Self { inst, inc }
    }

    pub fn eval(&mut self, x: &[f64]) -> Result<f64, ProblemError> {
        let y = self.inst.evaluate(x)?;
        self.inc.evals += 1;
        if y < self.inc.y {
            self.inc.y = y;
            self.inc.x.copy_from_slice(x);
        }
        Ok(y)
    }
}

#[derive(Debug, Clone)]
enum Engine {
    NelderMead(nelder_mead::NelderMead),
    Powell(powell::Powell),
    CG(cg::ConjugateGradient),
    BFGS(bfgs::Bfgs),
    CMA(Box<cma::Cma>),
}

/// What an engine reports after an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Progress {
    Continue,
    Converged,
    Failed,
}

/// The suspended state of one optimizer run.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    spec: OptimizerSpec,
    engine: Engine,
    incumbent: Incumbent,
    iterations: u64,
    status: Status,
}

impl OptimizerState {
    /// Prepares a run from `x0`. Costs: NelderMead k+1 evaluations, Powell 1,
    /// CG and BFGS k+1 (value plus gradient), CMA none.
    pub fn init(
        spec: &OptimizerSpec,
        instance: &mut ProblemInstance,
        x0: &[f64],
        seed: u64,
    ) -> Result<Self, OptimizerError> {
        let dim = instance.dim();
        if x0.len() != dim {
            return Err(OptimizerError::Dimension { expected: dim, got: x0.len() });
        }
        let mut incumbent = Incumbent::new(dim);
        let mut obj = Objective::new(instance, &mut incumbent);
        let started = match spec.method {
            Method::NelderMead => nelder_mead::NelderMead::init(
                &mut obj,
                x0,
                spec.param("xatol", 1e-11),
                spec.param("fatol", 1e-11),
            )
            .map(Engine::NelderMead),
            Method::Powell => {
                powell::Powell::init(&mut obj, x0, spec.param("xtol", 1e-11), spec.param("ftol", 1e-11))
                    .map(Engine::Powell)
            }
            Method::CG => {
                cg::ConjugateGradient::init(&mut obj, x0, spec.param("gtol", 1e-8), spec.param("c1", 1e-4))
                    .map(Engine::CG)
            }
            Method::BFGS => {
                bfgs::Bfgs::init(&mut obj, x0, spec.param("gtol", 1e-8), spec.param("c1", 1e-4))
                    .map(Engine::BFGS)
            }
            Method::CMA => {
                let params = CmaParams::for_spec(spec, dim)?;
                Ok(Engine::CMA(Box::new(cma::Cma::new(params, x0, seed))))
            }
        };
        let engine = match started {
            Ok(engine) => engine,
            Err(ProblemError::BudgetExhausted(_)) => {
                return Err(OptimizerError::BudgetExhausted(outcome(&incumbent, incumbent.evals, false)))
            }
            Err(e) => return Err(e.into()),
        };
        Ok(Self { spec: spec.clone(), engine, incumbent, iterations: 0, status: Status::Running })
    }

    /// Runs exactly one iteration.
    ///
    /// A numerical breakdown is not an error: the state moves to
    /// [`Status::Failed`] and the outcome is returned normally. Running out of
    /// budget mid-iteration leaves the state failed and returns
    /// [`OptimizerError::BudgetExhausted`] with the partial incumbent.
    pub fn step(&mut self, instance: &mut ProblemInstance) -> Result<StepOutcome, OptimizerError> {
        if self.status != Status::Running {
            return Err(OptimizerError::NotRunning(self.status));
        }
        let before = self.incumbent.evals;
        self.iterations += 1;
        let mut obj = Objective::new(instance, &mut self.incumbent);
        let progress = match &mut self.engine {
            Engine::NelderMead(e) => e.step(&mut obj),
            Engine::Powell(e) => e.step(&mut obj),
            Engine::CG(e) => e.step(&mut obj),
            Engine::BFGS(e) => e.step(&mut obj),
            Engine::CMA(e) => e.step(&mut obj),
        };
        let used = self.incumbent.evals - before;
        match progress {
            Ok(Progress::Continue) => Ok(outcome(&self.incumbent, used, false)),
            Ok(Progress::Converged) => {
                self.status = Status::Converged;
                Ok(outcome(&self.incumbent, used, true))
            }
            Ok(Progress::Failed) | Err(ProblemError::NonFinite) => {
                self.status = Status::Failed;
                Ok(outcome(&self.incumbent, used, false))
            }
            Err(ProblemError::BudgetExhausted(_)) => {
                self.status = Status::Failed;
                Err(OptimizerError::BudgetExhausted(outcome(&self.incumbent, used, false)))
            }
            Err(e) => {
                self.status = Status::Failed;
                Err(e.into())
            }
        }
    }

    pub fn spec(&self) -> &OptimizerSpec {
        &self.spec
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn iteration_count(&self) -> u64 {
        self.iterations
    }

    /// Evaluations consumed so far, initialization included.
    pub fn evals(&self) -> u64 {
        self.incumbent.evals
    }

    pub fn best_x(&self) -> &[f64] {
        &self.incumbent.x
    }

    pub fn best_y(&self) -> f64 {
        self.incumbent.y
    }

    /// Current CMA step size, `None` for other methods.
    pub fn cma_sigma(&self) -> Option<f64> {
        match &self.engine {
            Engine::CMA(c) => Some(c.sigma()),
            _ => None,
        }
    }

    /// Current BFGS inverse-Hessian approximation (row-major), `None` for
    /// other methods.
    pub fn bfgs_inverse_hessian(&self) -> Option<Vec<f64>> {
        match &self.engine {
            Engine::BFGS(b) => Some(b.inverse_hessian()),
            _ => None,
        }
    }

    pub fn cma_population_size(&self) -> Option<usize> {
        match &self.engine {
            Engine::CMA(c) => Some(c.lambda()),
            _ => None,
        }
    }
}

fn outcome(inc: &Incumbent, used: u64, converged: bool) -> StepOutcome {
    StepOutcome { evals_used: used, best_x: inc.x.clone(), best_y: inc.y, converged }
}

/// Free-function form of [`OptimizerState::init`].
pub fn init_optimizer(
    spec: &OptimizerSpec,
    instance: &mut ProblemInstance,
    x0: &[f64],
    seed: u64,
) -> Result<OptimizerState, OptimizerError> {
    OptimizerState::init(spec, instance, x0, seed)
}

/// Free-function form of [`OptimizerState::step`].
pub fn step_optimizer(
    state: &mut OptimizerState,
    instance: &mut ProblemInstance,
) -> Result<StepOutcome, OptimizerError> {
    state.step(instance)
}

/// One CMA generation; rejects non-CMA states.
pub fn cma_generation(
    state: &mut OptimizerState,
    instance: &mut ProblemInstance,
) -> Result<StepOutcome, OptimizerError> {
    if state.spec.method != Method::CMA {
        return Err(OptimizerError::InvalidParam(format!(
            "cma_generation called on a {} state",
            state.spec.method
        )));
    }
    state.step(instance)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

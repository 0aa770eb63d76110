//! Portfolio population and online selection strategies.
//!
//! A [`Population`] holds one suspended run per portfolio member, all sharing
//! a single problem instance. Each round a [`SelectionStrategy`] picks one
//! member, which then runs a single iteration.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment::{MLogRow, TrialRecord};
use crate::globalizer::Runner;
use crate::optimizers::{OptimizerError, OptimizerSpec, StepOutcome};
use crate::problems::{ProblemInstance, TargetSpec};
use crate::seeding::{self, tag, StreamRng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PortfolioError {
    #[error("portfolio is empty")]
    Empty,
    #[error("member index {index} out of range for population of {size}")]
    Index { index: usize, size: usize },
    #[error("epsilon must lie in [0, 1], got {0}")]
    Epsilon(f64),
    /// The member ran out of budget mid-iteration; accounting for the partial
    /// iteration has been applied.
    #[error("evaluation budget exhausted")]
    BudgetExhausted(StepOutcome),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
}

/// One portfolio member: a restartable run plus its bookkeeping.
#[derive(Debug, Clone)]
pub struct Member {
    method_name: String,
    runner: Runner,
    x: Vec<f64>,
    y: f64,
    iterations: u64,
    evals: u64,
}

impl Member {
    pub fn method_name(&self) -> &str {
        &self.method_name
    }

    /// Best point this member has evaluated, initialization included.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// Number of times this member was stepped.
    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    /// Evaluations spent by this member, initialization included.
    pub fn evals(&self) -> u64 {
        self.evals
    }

    /// Value strategies compare: `+inf` until the member has been stepped.
    pub fn selection_value(&self) -> f64 {
        if self.iterations == 0 {
            f64::INFINITY
        } else {
            self.y
        }
    }

    pub fn runner(&self) -> &Runner {
        &self.runner
    }
}

#[derive(Debug, Clone)]
pub struct Population {
    members: Vec<Member>,
    round: u64,
    total_evals: u64,
    mlog: Vec<MLogRow>,
    seed: u64,
}

impl Population {
    /// One member per spec, each on its own seeded stream.
    pub fn new(portfolio: &[OptimizerSpec], instance: &mut ProblemInstance, seed: u64) -> Result<Self, PortfolioError> {
        if portfolio.is_empty() {
            return Err(PortfolioError::Empty);
        }
        let mut pop = Self { members: Vec::with_capacity(portfolio.len()), round: 0, total_evals: 0, mlog: Vec::new(), seed };
        for spec in portfolio {
            pop.add_member(spec, instance)?;
        }
        Ok(pop)
    }

    /// Appends a freshly initialized member and returns its index. The member
    /// seed derives from the population seed and the new index.
    pub fn add_member(&mut self, spec: &OptimizerSpec, instance: &mut ProblemInstance) -> Result<usize, PortfolioError> {
        let index = self.members.len();
        let member_seed = seeding::derive_seed(&[self.seed, tag::MEMBER, index as u64]);
        self.add_member_seeded(spec, instance, member_seed)
    }

    pub fn add_member_seeded(
        &mut self,
        spec: &OptimizerSpec,
        instance: &mut ProblemInstance,
        member_seed: u64,
    ) -> Result<usize, PortfolioError> {
        let before = instance.eval_count();
        let runner = Runner::new(spec, instance, member_seed)?;
        let used = instance.eval_count() - before;
        let (x, y) = runner.best();
        self.members.push(Member {
            method_name: spec.label().to_string(),
            x: x.to_vec(),
            y,
            runner,
            iterations: 0,
            evals: used,
        });
        self.total_evals += used;
        Ok(self.members.len() - 1)
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn total_evals(&self) -> u64 {
        self.total_evals
    }

    pub fn mlog(&self) -> &[MLogRow] {
        &self.mlog
    }

    pub fn into_mlog(self) -> Vec<MLogRow> {
        self.mlog
    }

    /// Lowest value over all members.
    pub fn best_y(&self) -> f64 {
        self.members.iter().map(|m| m.y).fold(f64::INFINITY, f64::min)
    }

    /// Runs one iteration of member `idx` and appends an mlog row.
    pub fn member_step(&mut self, idx: usize, instance: &mut ProblemInstance) -> Result<StepOutcome, PortfolioError> {
        let size = self.members.len();
        let member = self.members.get_mut(idx).ok_or(PortfolioError::Index { index: idx, size })?;
        let before = instance.eval_count();
        let (outcome, exhausted) = match member.runner.step(instance) {
            Ok(o) => (o, false),
            Err(OptimizerError::BudgetExhausted(partial)) => (partial, true),
            Err(e) => return Err(e.into()),
        };
        let used = instance.eval_count() - before;
        member.iterations += 1;
        member.evals += used;
        if outcome.best_y < member.y {
            member.y = outcome.best_y;
            member.x.clone_from(&outcome.best_x);
        }
        let member_best = member.y;
        let name = member.method_name.clone();
        let member_evals = member.evals;
        self.round += 1;
        self.total_evals += used;
        let f_opt = instance.f_opt();
        self.mlog.push(MLogRow {
            round: self.round,
            member_index: idx,
            member_name: name,
            member_evals,
            total_evals: self.total_evals,
            member_best_delta: member_best - f_opt,
            portfolio_best_delta: self.best_y() - f_opt,
        });
        if exhausted {
            Err(PortfolioError::BudgetExhausted(outcome))
        } else {
            Ok(outcome)
        }
    }
}

/// Which member runs next. Implementations only read the population.
pub trait SelectionStrategy {
    fn select(&self, pop: &Population, rng: &mut StreamRng) -> Result<usize, PortfolioError>;
}

/// Uniformly random member each round.
#[derive(Debug, Clone, Copy, Default)]
pub struct Uniform;

impl SelectionStrategy for Uniform {
    fn select(&self, pop: &Population, rng: &mut StreamRng) -> Result<usize, PortfolioError> {
        select_unif(pop, rng)
    }
}

/// Best member with probability `1 - epsilon`, otherwise a uniform pick over
/// all members (the best one included).
#[derive(Debug, Clone, Copy)]
pub struct EpsilonGreedy {
    epsilon: f64,
}

impl EpsilonGreedy {
    pub fn new(epsilon: f64) -> Result<Self, PortfolioError> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(PortfolioError::Epsilon(epsilon));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl SelectionStrategy for EpsilonGreedy {
    fn select(&self, pop: &Population, rng: &mut StreamRng) -> Result<usize, PortfolioError> {
        select_epsilon_greedy(pop, rng, self.epsilon)
    }
}

pub fn select_unif(pop: &Population, rng: &mut StreamRng) -> Result<usize, PortfolioError> {
    if pop.is_empty() {
        return Err(PortfolioError::Empty);
    }
    Ok(rng.random_range(0..pop.len()))
}

/// Index of the lowest selection value; ties go to the lowest index.
pub fn greedy_index(pop: &Population) -> Result<usize, PortfolioError> {
    let mut best = None;
    for (i, m) in pop.members.iter().enumerate() {
        let v = m.selection_value();
        match best {
            Some((_, bv)) if v >= bv => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i).ok_or(PortfolioError::Empty)
}

pub fn select_epsilon_greedy(pop: &Population, rng: &mut StreamRng, epsilon: f64) -> Result<usize, PortfolioError> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(PortfolioError::Epsilon(epsilon));
    }
    if pop.is_empty() {
        return Err(PortfolioError::Empty);
    }
    if epsilon >= 1.0 {
        return select_unif(pop, rng);
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return select_unif(pop, rng);
    }
    greedy_index(pop)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum StrategyConfig {
    #[serde(rename = "UNIF")]
    Unif,
    EpsilonGreedy { epsilon: f64 },
}

impl StrategyConfig {
    pub fn build(&self) -> Result<Box<dyn SelectionStrategy + Send + Sync>, PortfolioError> {
        Ok(match *self {
            StrategyConfig::Unif => Box::new(Uniform),
            StrategyConfig::EpsilonGreedy { epsilon } => Box::new(EpsilonGreedy::new(epsilon)?),
        })
    }

    /// `UNIF`, or `EG` followed by epsilon in percent (`EG50`).
    pub fn default_label(&self) -> String {
        match self {
            StrategyConfig::Unif => "UNIF".to_string(),
            StrategyConfig::EpsilonGreedy { epsilon } => format!("EG{}", (epsilon * 100.0).round() as i64),
        }
    }
}

/// Everything a finished trial produced.
#[derive(Debug, Clone)]
pub struct TrialRun {
    pub record: TrialRecord,
    pub mlog: Vec<MLogRow>,
}

/// Runs selection rounds on a fresh instance until the final target is hit
/// or `budget` evaluations are spent. Initialization is never cut short, so
/// a budget below its cost yields an unsuccessful trial of exactly the
/// initialization cost.
pub fn run_portfolio_trial(
    portfolio: &[OptimizerSpec],
    strategy: &StrategyConfig,
    instance: &mut ProblemInstance,
    budget: u64,
    final_target: TargetSpec,
    seed: u64,
    label: &str,
) -> Result<TrialRun, PortfolioError> {
    let selector = strategy.build()?;
    instance.set_budget(None);
    let mut pop = Population::new(portfolio, instance, seed)?;
    instance.set_budget(Some(budget));
    let mut rng = seeding::stream(&[seed, tag::SELECTION]);
    loop {
        if instance.eval_count() > 0 && instance.best_f() - instance.f_opt() <= final_target.delta_f {
            break;
        }
        if !instance.budget_left() {
            break;
        }
        let idx = selector.select(&pop, &mut rng)?;
        match pop.member_step(idx, instance) {
            Ok(_) => {}
            Err(PortfolioError::BudgetExhausted(_)) => break,
            Err(e) => return Err(e),
        }
    }
    instance.set_budget(None);
    let record = TrialRecord::from_instance(instance, label);
    Ok(TrialRun { record, mlog: pop.into_mlog() })
}

//! Expected running time and bootstrapped run-length distributions.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::experiment::TrialRecord;
use crate::problems::{Group, ProblemId, TargetSpec};
use crate::seeding::StreamRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no trials given")]
    Empty,
    #[error("trials mix different {0}")]
    Mixed(&'static str),
    #[error("budgets must be positive and ascending")]
    Budgets,
    #[error("precision {0:e} is not resolvable from ladder-only records")]
    Unresolvable(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErtResult {
    pub delta_f: f64,
    /// `f64::INFINITY` when no trial reached the target.
    pub ert: f64,
    pub n_success: usize,
    pub n_trials: usize,
}

fn check_resolvable(trials: &[TrialRecord], delta_f: f64) -> Result<(), MetricsError> {
    if trials.iter().all(|t| t.supports_delta(delta_f)) {
        Ok(())
    } else {
        Err(MetricsError::Unresolvable(delta_f))
    }
}

/// Evaluations spent before reaching `Δf`, summed over all trials (a failed
/// trial contributes its whole budget), divided by the number of successes.
pub fn compute_ert(trials: &[TrialRecord], delta_f: f64) -> Result<ErtResult, MetricsError> {
    let first = trials.first().ok_or(MetricsError::Empty)?;
    if trials.iter().any(|t| t.function_id != first.function_id) {
        return Err(MetricsError::Mixed("functions"));
    }
    if trials.iter().any(|t| t.dim != first.dim) {
        return Err(MetricsError::Mixed("dimensions"));
    }
    if trials.iter().any(|t| t.solver_label != first.solver_label) {
        return Err(MetricsError::Mixed("solvers"));
    }
    check_resolvable(trials, delta_f)?;
    let mut spent = 0u64;
    let mut n_success = 0;
    for t in trials {
        match t.evals_to_target(delta_f) {
            Some(e) => {
                spent += e;
                n_success += 1;
            }
            None => spent += t.evals_total,
        }
    }
    let ert = if n_success == 0 { f64::INFINITY } else { spent as f64 / n_success as f64 };
    Ok(ErtResult { delta_f, ert, n_success, n_trials: trials.len() })
}

/// Per-trial outcomes for one precision, prepared for repeated bootstrap
/// draws.
#[derive(Debug, Clone)]
struct Outcomes {
    // Some(evals at attainment) or None with the trial budget
    draws: Vec<Result<u64, u64>>,
    any_success: bool,
}

impl Outcomes {
    fn new(trials: &[TrialRecord], delta_f: f64) -> Self {
        let draws: Vec<Result<u64, u64>> =
            trials.iter().map(|t| t.evals_to_target(delta_f).ok_or(t.evals_total)).collect();
        let any_success = draws.iter().any(|d| d.is_ok());
        Self { draws, any_success }
    }

    fn sample(&self, rng: &mut StreamRng) -> Option<u64> {
        if !self.any_success {
            return None;
        }
        let mut total = 0u64;
        loop {
            match self.draws[rng.random_range(0..self.draws.len())] {
                Ok(hit) => return Some(total + hit),
                Err(budget) => total += budget,
            }
        }
    }
}

/// One simulated-restart run length: trials drawn with replacement, failed
/// budgets accumulated until the first success. `None` stands for an infinite
/// run length (no trial ever succeeded).
pub fn bootstrap_runlength(
    trials: &[TrialRecord],
    delta_f: f64,
    rng: &mut StreamRng,
) -> Result<Option<u64>, MetricsError> {
    if trials.is_empty() {
        return Err(MetricsError::Empty);
    }
    check_resolvable(trials, delta_f)?;
    Ok(Outcomes::new(trials, delta_f).sample(rng))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcdfCurve {
    /// Budgets in evaluations per dimension, ascending.
    pub budgets: Vec<f64>,
    pub proportion: Vec<f64>,
}

impl EcdfCurve {
    /// Proportion at the largest grid budget not exceeding `budget`; zero
    /// below the grid.
    pub fn value_at(&self, budget: f64) -> f64 {
        self.budgets
            .iter()
            .zip(&self.proportion)
            .take_while(|(b, _)| **b <= budget)
            .last()
            .map_or(0.0, |(_, p)| *p)
    }
}

pub const DEFAULT_SAMPLES: usize = 100;

/// 61 budgets log-spaced from 1 to 10^4 evaluations per dimension.
pub fn budget_grid() -> Vec<f64> {
    (0..=60).map(|i| if i == 60 { 1e4 } else { 10f64.powf(i as f64 / 15.0) }).collect()
}

/// Bootstrapped distribution of run lengths over every (function, target)
/// pair. `groups` holds the trials of each function; all trials must share
/// one dimension.
pub fn compute_ecdf(
    groups: &[Vec<TrialRecord>],
    targets: &[TargetSpec],
    budgets: &[f64],
    samples_per_pair: usize,
    rng: &mut StreamRng,
) -> Result<EcdfCurve, MetricsError> {
    if groups.is_empty() || groups.iter().any(|g| g.is_empty()) || targets.is_empty() || samples_per_pair == 0 {
        return Err(MetricsError::Empty);
    }
    let dim = groups[0][0].dim;
    if groups.iter().flatten().any(|t| t.dim != dim) {
        return Err(MetricsError::Mixed("dimensions"));
    }
    if budgets.is_empty() || budgets[0] <= 0.0 || budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MetricsError::Budgets);
    }
    let mut lengths: Vec<f64> = Vec::with_capacity(groups.len() * targets.len() * samples_per_pair);
    for trials in groups {
        for target in targets {
            check_resolvable(trials, target.delta_f)?;
            let outcomes = Outcomes::new(trials, target.delta_f);
            for _ in 0..samples_per_pair {
                lengths.push(outcomes.sample(rng).map_or(f64::INFINITY, |v| v as f64));
            }
        }
    }
    lengths.sort_by(f64::total_cmp);
    let total = lengths.len() as f64;
    let proportion = budgets
        .iter()
        .map(|b| {
            let limit = b * dim as f64;
            lengths.partition_point(|&l| l <= limit) as f64 / total
        })
        .collect();
    Ok(EcdfCurve { budgets: budgets.to_vec(), proportion })
}

/// Report grouping: one of the five landscape classes or all functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Aggregate {
    Group(Group),
    All,
}

impl Aggregate {
    pub fn all() -> Vec<Aggregate> {
        let mut v: Vec<Aggregate> = Group::ALL.into_iter().map(Aggregate::Group).collect();
        v.push(Aggregate::All);
        v
    }

    pub fn label(self) -> &'static str {
        match self {
            Aggregate::Group(g) => g.label(),
            Aggregate::All => "all",
        }
    }

    pub fn contains(self, function_id: u32) -> bool {
        match self {
            Aggregate::All => true,
            Aggregate::Group(g) => ProblemId::new(function_id).is_ok_and(|p| p.group() == g),
        }
    }
}

/// Splits records of one solver and dimension into per-function groups,
/// keeping only functions in `aggregate`.
pub fn group_by_function(records: &[&TrialRecord], aggregate: Aggregate) -> Vec<Vec<TrialRecord>> {
    let mut by_fn: BTreeMap<u32, Vec<TrialRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| aggregate.contains(r.function_id)) {
        by_fn.entry(r.function_id).or_default().push((*r).clone());
    }
    by_fn.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Improvement;
    use crate::seeding;

    fn success(evals: u64, budget: u64) -> TrialRecord {
        TrialRecord::from_trace(1, 2, 1, "s", budget, vec![Improvement { evals, delta: 0.0 }])
    }

    fn failure(budget: u64) -> TrialRecord {
        TrialRecord::from_trace(1, 2, 1, "s", budget, vec![Improvement { evals: 1, delta: 50.0 }])
    }

    #[test]
    fn ert_worked_examples() {
        let r = compute_ert(&[success(100, 100), success(200, 200), failure(1000)], 1e-8).unwrap();
        assert_eq!(r.ert, 650.0);
        assert_eq!((r.n_success, r.n_trials), (2, 3));
        let r = compute_ert(&[success(100, 150), success(200, 900), success(300, 300)], 1e-8).unwrap();
        assert_eq!(r.ert, 200.0);
        let r = compute_ert(&[failure(10), failure(20)], 1e-8).unwrap();
        assert!(r.ert.is_infinite());
        assert_eq!(r.n_success, 0);
    }

    #[test]
    fn ert_errors() {
        assert_eq!(compute_ert(&[], 1.0), Err(MetricsError::Empty));
        let mut other = success(5, 5);
        other.function_id = 2;
        assert_eq!(compute_ert(&[success(5, 5), other], 1.0), Err(MetricsError::Mixed("functions")));
        let mut other = success(5, 5);
        other.dim = 3;
        assert_eq!(compute_ert(&[success(5, 5), other], 1.0), Err(MetricsError::Mixed("dimensions")));
    }

    #[test]
    fn bootstrap_edge_cases() {
        let mut rng = seeding::stream(&[1]);
        let all = [success(100, 100), success(300, 300)];
        for _ in 0..100 {
            let v = bootstrap_runlength(&all, 1e-8, &mut rng).unwrap().unwrap();
            assert!(v == 100 || v == 300);
        }
        assert_eq!(bootstrap_runlength(&[failure(5)], 1e-8, &mut rng).unwrap(), None);
        assert_eq!(bootstrap_runlength(&[], 1e-8, &mut rng), Err(MetricsError::Empty));
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let trials = [success(100, 100), failure(1000), failure(50)];
        let mut a = seeding::stream(&[9]);
        let mut b = seeding::stream(&[9]);
        for _ in 0..50 {
            assert_eq!(
                bootstrap_runlength(&trials, 1e-8, &mut a).unwrap(),
                bootstrap_runlength(&trials, 1e-8, &mut b).unwrap()
            );
        }
    }

    #[test]
    fn ecdf_all_early_hits() {
        let trials = vec![vec![success(60, 100), success(100, 100)]];
        let mut rng = seeding::stream(&[2]);
        let grid = budget_grid();
        let c = compute_ecdf(&trials, &[TargetSpec::new(1e-8)], &grid, 20, &mut rng).unwrap();
        for (b, p) in c.budgets.iter().zip(&c.proportion) {
            if *b >= 50.0 {
                assert_eq!(*p, 1.0);
            }
        }
        assert_eq!(c.value_at(49.0), c.proportion[grid.iter().rposition(|b| *b <= 49.0).unwrap()]);
    }

    #[test]
    fn ecdf_no_successes_is_flat_zero() {
        let trials = vec![vec![failure(100)], vec![failure(30)]];
        let mut rng = seeding::stream(&[3]);
        let c = compute_ecdf(&trials, &crate::problems::target_ladder(5, 1e-8, 1.0).unwrap(), &budget_grid(), 10, &mut rng)
            .unwrap();
        assert!(c.proportion.iter().all(|p| *p == 0.0));
    }

    #[test]
    fn grid_shape() {
        let g = budget_grid();
        assert_eq!(g.len(), 61);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[60], 1e4);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn aggregates() {
        assert_eq!(Aggregate::all().len(), 6);
        assert!(Aggregate::All.contains(7));
        assert!(Aggregate::Group(Group::Separable).contains(1));
        assert!(!Aggregate::Group(Group::Separable).contains(3));
    }
}

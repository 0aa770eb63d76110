//! Benchmark suite: ten shifted and rotated test functions grouped into five
//! landscape classes, plus evaluation accounting and target ladders.

pub mod functions;

use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding::{self, tag};
use functions::Peaks;

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("dimension {0} outside supported range {MIN_DIM}..={MAX_DIM}")]
    Dimension(usize),
    #[error("unknown function id {0} (expected 1..=10)")]
    UnknownFunction(u32),
    #[error("point has length {got}, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("non-finite coordinate in evaluation point")]
    NonFinite,
    #[error("evaluation budget of {0} exhausted")]
    BudgetExhausted(u64),
    #[error("no evaluations recorded yet")]
    NoEvaluations,
    #[error("invalid target ladder: {0}")]
    Ladder(&'static str),
}

/// Landscape class used for aggregated reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    Separable,
    Moderate,
    IllConditioned,
    MultiModal,
    WeaklyStructured,
}

impl Group {
    pub const ALL: [Group; 5] = [
        Group::Separable,
        Group::Moderate,
        Group::IllConditioned,
        Group::MultiModal,
        Group::WeaklyStructured,
    ];

    /// Short file-name friendly label.
    pub fn label(self) -> &'static str {
        match self {
            Group::Separable => "separ",
            Group::Moderate => "lcond",
            Group::IllConditioned => "hcond",
            Group::MultiModal => "multi",
            Group::WeaklyStructured => "mult2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct ProblemId(u32);

impl ProblemId {
    pub fn new(function_id: u32) -> Result<Self, ProblemError> {
        if (1..=10).contains(&function_id) {
            Ok(Self(function_id))
        } else {
            Err(ProblemError::UnknownFunction(function_id))
        }
    }

    pub fn all() -> impl Iterator<Item = ProblemId> {
        (1..=10).map(ProblemId)
    }

    pub fn function_id(self) -> u32 {
        self.0
    }

    pub fn group(self) -> Group {
        match self.0 {
            1 | 2 => Group::Separable,
            4 | 5 => Group::Moderate,
            6 | 7 => Group::IllConditioned,
            3 | 8 => Group::MultiModal,
            _ => Group::WeaklyStructured,
        }
    }

    pub fn name(self) -> &'static str {
        match self.0 {
            1 => "sphere",
            2 => "separable ellipsoid",
            3 => "separable rastrigin",
            4 => "rosenbrock",
            5 => "attractive sector",
            6 => "rotated ellipsoid",
            7 => "bent cigar",
            8 => "rotated rastrigin",
            9 => "schaffers f7",
            _ => "gallagher 101 peaks",
        }
    }

    fn is_rotated(self) -> bool {
        self.0 > 3
    }
}

impl TryFrom<u32> for ProblemId {
    type Error = ProblemError;
    fn try_from(v: u32) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<ProblemId> for u32 {
    fn from(p: ProblemId) -> u32 {
        p.0
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

/// A point in the best-so-far trajectory: after `evals` evaluations the best
/// precision reached is `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub evals: u64,
    pub delta: f64,
}

/// One concrete benchmark problem with its evaluation bookkeeping.
///
/// `f(x) = g(R (x - x_opt)) + f_opt`, so downstream code must always work with
/// `f - f_opt`.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    id: ProblemId,
    dim: usize,
    instance_seed: u64,
    x_opt: Vec<f64>,
    f_opt: f64,
    rotation: DMatrix<f64>,
    peaks: Option<Peaks>,
    eval_count: u64,
    best_f: f64,
    best_x: Vec<f64>,
    budget: Option<u64>,
    improvements: Vec<Improvement>,
    recorded: Option<Vec<Vec<f64>>>,
}

impl ProblemInstance {
    /// Builds the instance for `(problem, dim, instance_seed)`; a pure function
    /// of its arguments.
    pub fn new(problem: ProblemId, dim: usize, instance_seed: u64) -> Result<Self, ProblemError> {
        if !(MIN_DIM..=MAX_DIM).contains(&dim) {
            return Err(ProblemError::Dimension(dim));
        }
        let fid = problem.function_id() as u64;
        let coords = [fid, dim as u64, instance_seed];

        let mut rng = seeding::stream(&[coords[0], coords[1], coords[2], tag::OPTIMUM]);
        let x_opt: Vec<f64> = (0..dim).map(|_| rng.random_range(-4.0..=4.0)).collect();
        let f_opt = rng.random_range(-100.0..=100.0);

        let rotation = if problem.is_rotated() {
            let mut rng = seeding::stream(&[coords[0], coords[1], coords[2], tag::ROTATION]);
            random_orthogonal(dim, &mut rng)
        } else {
            DMatrix::identity(dim, dim)
        };

        let peaks = (problem.function_id() == 10).then(|| {
            let mut rng = seeding::stream(&[coords[0], coords[1], coords[2], tag::PEAKS]);
            Peaks::generate(&mut rng, &x_opt)
        });

        Ok(Self::assemble(problem, dim, instance_seed, x_opt, f_opt, rotation, peaks))
    }

    /// Builds an instance with an explicit transform. Intended for tests that
    /// need to probe the core landscapes directly.
    pub fn with_transform(
        problem: ProblemId,
        x_opt: Vec<f64>,
        f_opt: f64,
        rotation: DMatrix<f64>,
    ) -> Result<Self, ProblemError> {
        let dim = x_opt.len();
        if !(MIN_DIM..=MAX_DIM).contains(&dim) {
            return Err(ProblemError::Dimension(dim));
        }
        assert_eq!(rotation.shape(), (dim, dim), "rotation shape must match x_opt");
        let peaks = (problem.function_id() == 10).then(|| {
            let mut rng = seeding::stream(&[10, dim as u64, 0, tag::PEAKS]);
            Peaks::generate(&mut rng, &x_opt)
        });
        Ok(Self::assemble(problem, dim, 0, x_opt, f_opt, rotation, peaks))
    }

    fn assemble(
        id: ProblemId,
        dim: usize,
        instance_seed: u64,
        x_opt: Vec<f64>,
        f_opt: f64,
        rotation: DMatrix<f64>,
        peaks: Option<Peaks>,
    ) -> Self {
        Self {
            id,
            dim,
            instance_seed,
            x_opt,
            f_opt,
            rotation,
            peaks,
            eval_count: 0,
            best_f: f64::INFINITY,
            best_x: vec![f64::NAN; dim],
            budget: None,
            improvements: Vec::new(),
            recorded: None,
        }
    }

    pub fn problem_id(&self) -> ProblemId {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn instance_seed(&self) -> u64 {
        self.instance_seed
    }

    pub fn x_opt(&self) -> &[f64] {
        &self.x_opt
    }

    pub fn f_opt(&self) -> f64 {
        self.f_opt
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn eval_count(&self) -> u64 {
        self.eval_count
    }

    pub fn best_f(&self) -> f64 {
        self.best_f
    }

    pub fn best_x(&self) -> &[f64] {
        &self.best_x
    }

    /// Caps the total number of evaluations; further calls to
    /// [`evaluate`](Self::evaluate) fail with [`ProblemError::BudgetExhausted`].
    pub fn set_budget(&mut self, budget: Option<u64>) {
        self.budget = budget;
    }

    pub fn budget(&self) -> Option<u64> {
        self.budget
    }

    pub fn budget_left(&self) -> bool {
        self.budget.is_none_or(|b| self.eval_count < b)
    }

    /// Every strict improvement of the best-so-far value, in evaluation order.
    pub fn improvements(&self) -> &[Improvement] {
        &self.improvements
    }

    /// Starts recording every evaluated point.
    pub fn record_points(&mut self) {
        self.recorded.get_or_insert_with(Vec::new);
    }

    pub fn recorded_points(&self) -> Option<&[Vec<f64>]> {
        self.recorded.as_deref()
    }

    /// Objective value without touching any counter.
    pub fn value(&self, x: &[f64]) -> f64 {
        if let Some(peaks) = &self.peaks {
            return peaks.value(x, &self.rotation) + self.f_opt;
        }
        let offset: Vec<f64> = x.iter().zip(&self.x_opt).map(|(a, o)| a - o).collect();
        let z: Vec<f64> = if self.id.is_rotated() {
            (0..self.dim)
                .map(|r| (0..self.dim).map(|c| self.rotation[(r, c)] * offset[c]).sum())
                .collect()
        } else {
            offset
        };
        let g = match self.id.function_id() {
            1 => functions::sphere(&z),
            2 | 6 => functions::ellipsoid(&z),
            3 | 8 => functions::rastrigin(&z),
            4 => functions::rosenbrock_centered(&z),
            5 => functions::attractive_sector(&z, &self.x_opt),
            7 => functions::bent_cigar(&z),
            9 => functions::schaffers_f7(&z),
            _ => unreachable!("function 10 is handled by the peak model"),
        };
        g + self.f_opt
    }

    /// Counted evaluation.
    pub fn evaluate(&mut self, x: &[f64]) -> Result<f64, ProblemError> {
        if x.len() != self.dim {
            return Err(ProblemError::Length { expected: self.dim, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ProblemError::NonFinite);
        }
        if let Some(b) = self.budget {
            if self.eval_count >= b {
                return Err(ProblemError::BudgetExhausted(b));
            }
        }
        let y = self.value(x);
        self.eval_count += 1;
        if let Some(rec) = &mut self.recorded {
            rec.push(x.to_vec());
        }
        if y < self.best_f {
            self.best_f = y;
            self.best_x.copy_from_slice(x);
            self.improvements.push(Improvement { evals: self.eval_count, delta: y - self.f_opt });
        }
        Ok(y)
    }

    /// `best_f - f_opt`; a target `Δf` is hit iff this is `<= Δf`.
    pub fn best_delta(&self) -> Result<f64, ProblemError> {
        if self.eval_count == 0 {
            return Err(ProblemError::NoEvaluations);
        }
        Ok(self.best_f - self.f_opt)
    }
}

/// QR of a standard Gaussian matrix with the sign of `R`'s diagonal folded
/// into `Q`.
fn random_orthogonal(dim: usize, rng: &mut crate::seeding::StreamRng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub delta_f: f64,
}

impl TargetSpec {
    pub fn new(delta_f: f64) -> Self {
        Self { delta_f }
    }

    /// Absolute target value for an instance with optimum `f_opt`.
    pub fn f_t(&self, f_opt: f64) -> f64 {
        f_opt + self.delta_f
    }
}

/// `n` precisions spaced evenly in log10 from `high` down to `low`.
pub fn target_ladder(n: usize, low: f64, high: f64) -> Result<Vec<TargetSpec>, ProblemError> {
    if n < 2 {
        return Err(ProblemError::Ladder("need at least two targets"));
    }
    if !(low > 0.0 && high > 0.0) {
        return Err(ProblemError::Ladder("bounds must be positive"));
    }
    if low >= high {
        return Err(ProblemError::Ladder("low must be below high"));
    }
    let (lo, hi) = (low.log10(), high.log10());
    let last = n - 1;
    Ok((0..n)
        .map(|j| {
            let delta_f = match j {
                0 => high,
                j if j == last => low,
                j => 10f64.powf(hi - (hi - lo) * j as f64 / last as f64),
            };
            TargetSpec { delta_f }
        })
        .collect())
}

pub const STANDARD_TARGETS: usize = 50;

/// The 50 precisions from 1e2 down to 1e-8 used for records and ECDFs.
pub fn standard_ladder() -> Vec<TargetSpec> {
    target_ladder(STANDARD_TARGETS, 1e-8, 1e2).expect("standard ladder parameters are valid")
}

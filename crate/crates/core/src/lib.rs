//! Online algorithm portfolios for continuous black-box optimization.
//!
//! Several step-resumable optimizers share one problem instance and a
//! selection strategy decides, round by round, which of them runs its next
//! iteration. A benchmark harness runs solvers over a suite of shifted and
//! rotated test functions, writes per-iteration traces and per-trial records,
//! and computes expected running times and bootstrapped run-length
//! distributions from them.

pub mod cli;
pub mod experiment;
pub mod globalizer;
pub mod metrics;
pub mod optimizers;
pub mod portfolio;
pub mod problems;
pub mod seeding;

pub use globalizer::{bh_init, bh_step, HopParams, HopState, Runner};
pub use optimizers::{
    cma_generation, fd_gradient, init_optimizer, step_optimizer, Method, OptimizerError, OptimizerSpec,
    OptimizerState, Status, StepOutcome,
};
pub use problems::{standard_ladder, target_ladder, ProblemError, ProblemId, ProblemInstance, TargetSpec};

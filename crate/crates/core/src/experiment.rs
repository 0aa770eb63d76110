//! Benchmark driver and the on-disk formats it produces.
//!
//! A run iterates over `(function, dimension, instance)` in lexicographic
//! order, runs one trial per triple, writes one mlog trace per trial and a
//! `records.csv` table with one row per trial, plus a `meta.json` manifest.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optimizers::OptimizerSpec;
use crate::portfolio::{run_portfolio_trial, PortfolioError, StrategyConfig, TrialRun};
use crate::problems::{
    standard_ladder, Improvement, ProblemError, ProblemId, ProblemInstance, TargetSpec, STANDARD_TARGETS,
};
use crate::seeding::{self, tag};

pub const MLOG_MAGIC: &str = "# cocopf-mlog v1";
pub const MLOG_HEADER: &str = "round,member,name,member_evals,total_evals,member_best,portfolio_best";
pub const RECORDS_FILE: &str = "records.csv";
pub const META_FILE: &str = "meta.json";
pub const TRACE_FILE: &str = "improvements.csv";
pub const TRACE_HEADER: [&str; 6] = ["function", "dim", "instance", "solver", "evals", "delta"];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed records file {path}: {reason}")]
    Records { path: PathBuf, reason: String },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Portfolio(#[from] PortfolioError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

/// Formats `v` in C-style scientific notation (`1.500e-03`) with `digits`
/// digits after the point. Infinities print as `inf`.
pub fn sci(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "nan".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".to_string() } else { "-inf".to_string() };
    }
    let s = format!("{:.*e}", digits, v);
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

fn parse_float(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

/// One line of an mlog trace, written after each member iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct MLogRow {
    pub round: u64,
    pub member_index: usize,
    pub member_name: String,
    pub member_evals: u64,
    pub total_evals: u64,
    pub member_best_delta: f64,
    pub portfolio_best_delta: f64,
}

pub fn write_mlog<W: Write>(mut out: W, rows: &[MLogRow]) -> io::Result<()> {
    writeln!(out, "{MLOG_MAGIC}")?;
    writeln!(out, "{MLOG_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.round,
            r.member_index,
            r.member_name,
            r.member_evals,
            r.total_evals,
            sci(r.member_best_delta, 16),
            sci(r.portfolio_best_delta, 16)
        )?;
    }
    Ok(())
}

pub fn read_mlog(text: &str) -> Result<Vec<MLogRow>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(MLOG_MAGIC) {
        return Err("missing mlog magic line".into());
    }
    if lines.next() != Some(MLOG_HEADER) {
        return Err("missing mlog column header".into());
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(format!("row {}: expected 7 fields", i + 1));
            }
            let bad = |what: &str| format!("row {}: bad {what}", i + 1);
            Ok(MLogRow {
                round: f[0].parse().map_err(|_| bad("round"))?,
                member_index: f[1].parse().map_err(|_| bad("member"))?,
                member_name: f[2].to_string(),
                member_evals: f[3].parse().map_err(|_| bad("member_evals"))?,
                total_evals: f[4].parse().map_err(|_| bad("total_evals"))?,
                member_best_delta: parse_float(f[5]).ok_or_else(|| bad("member_best"))?,
                portfolio_best_delta: parse_float(f[6]).ok_or_else(|| bad("portfolio_best"))?,
            })
        })
        .collect()
}

/// How precisely a record knows when each precision was first reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HitResolution {
    /// Full improvement trace: exact for every `Δf`.
    Exact,
    /// Reconstructed from the standard ladder columns: exact only for ladder
    /// values.
    Ladder,
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub function_id: u32,
    pub dim: usize,
    pub instance_seed: u64,
    pub solver_label: String,
    pub evals_total: u64,
    pub best_delta_final: f64,
    hits: Vec<Improvement>,
    resolution: HitResolution,
}

impl TrialRecord {
    pub fn from_instance(instance: &ProblemInstance, label: &str) -> Self {
        Self {
            function_id: instance.problem_id().function_id(),
            dim: instance.dim(),
            instance_seed: instance.instance_seed(),
            solver_label: label.to_string(),
            evals_total: instance.eval_count(),
            best_delta_final: instance.best_delta().unwrap_or(f64::INFINITY),
            hits: instance.improvements().to_vec(),
            resolution: HitResolution::Exact,
        }
    }

    /// Builds a record from an explicit improvement trace (evaluation index at
    /// which the best precision dropped to `delta`).
    pub fn from_trace(
        function_id: u32,
        dim: usize,
        instance_seed: u64,
        solver_label: &str,
        evals_total: u64,
        trace: Vec<Improvement>,
    ) -> Self {
        let best_delta_final = trace.last().map_or(f64::INFINITY, |i| i.delta);
        Self {
            function_id,
            dim,
            instance_seed,
            solver_label: solver_label.to_string(),
            evals_total,
            best_delta_final,
            hits: trace,
            resolution: HitResolution::Exact,
        }
    }

    pub fn resolution(&self) -> HitResolution {
        self.resolution
    }

    /// Whether [`evals_to_target`](Self::evals_to_target) is exact for
    /// `delta_f`.
    pub fn supports_delta(&self, delta_f: f64) -> bool {
        match self.resolution {
            HitResolution::Exact => true,
            HitResolution::Ladder => ladder_index(delta_f).is_some(),
        }
    }

    /// First evaluation index at which the best precision was `<= delta_f`.
    pub fn evals_to_target(&self, delta_f: f64) -> Option<u64> {
        self.hits.iter().find(|h| h.delta <= delta_f).map(|h| h.evals)
    }

    /// Hits for the standard 50-target ladder.
    pub fn ladder_hits(&self) -> Vec<Option<u64>> {
        standard_ladder().iter().map(|t| self.evals_to_target(t.delta_f)).collect()
    }
}

/// Position of `delta_f` in the standard ladder, matching to 1e-9 relative.
pub fn ladder_index(delta_f: f64) -> Option<usize> {
    standard_ladder().iter().position(|t| ((t.delta_f - delta_f) / t.delta_f).abs() <= 1e-9)
}

pub fn records_header() -> Vec<String> {
    let mut h: Vec<String> = ["function", "dim", "instance", "solver", "evals_total", "best_delta_final"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..STANDARD_TARGETS).map(|j| format!("hit_{j}")));
    h
}

pub fn write_records<W: Write>(out: W, records: &[TrialRecord]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(records_header())?;
    for r in records {
        let mut row = vec![
            r.function_id.to_string(),
            r.dim.to_string(),
            r.instance_seed.to_string(),
            r.solver_label.clone(),
            r.evals_total.to_string(),
            sci(r.best_delta_final, 16),
        ];
        row.extend(r.ladder_hits().into_iter().map(|h| h.map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>, ExperimentError> {
    let malformed = |reason: String| ExperimentError::Records { path: path.to_path_buf(), reason };
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::Reader::from_reader(file);
    let header = reader.headers().map_err(|e| malformed(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != records_header() {
        return Err(malformed("unexpected header".into()));
    }
    let ladder = standard_ladder();
    let mut records = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| malformed(e.to_string()))?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let bad = |what: &str| malformed(format!("row {}: bad {what}", line + 1));
        let function_id: u32 = field(0).parse().map_err(|_| bad("function"))?;
        ProblemId::new(function_id).map_err(|_| bad("function"))?;
        let dim: usize = field(1).parse().map_err(|_| bad("dim"))?;
        let instance_seed: u64 = field(2).parse().map_err(|_| bad("instance"))?;
        let evals_total: u64 = field(4).parse().map_err(|_| bad("evals_total"))?;
        let best_delta_final = parse_float(field(5)).ok_or_else(|| bad("best_delta_final"))?;
        let mut hits = Vec::new();
        let mut previous = 0;
        for (j, target) in ladder.iter().enumerate() {
            let cell = field(6 + j);
            if cell.is_empty() {
                continue;
            }
            let evals: u64 = cell.parse().map_err(|_| bad("hit column"))?;
            if evals < previous || evals > evals_total {
                return Err(bad("hit column ordering"));
            }
            previous = evals;
            hits.push(Improvement { evals, delta: target.delta_f });
        }
        records.push(TrialRecord {
            function_id,
            dim,
            instance_seed,
            solver_label: field(3).to_string(),
            evals_total,
            best_delta_final,
            hits,
            resolution: HitResolution::Ladder,
        });
    }
    Ok(records)
}

/// Writes every improvement event of every record, one row per event.
pub fn write_trace<W: Write>(out: W, records: &[TrialRecord]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in records {
        for h in &r.hits {
            w.write_record([
                r.function_id.to_string(),
                r.dim.to_string(),
                r.instance_seed.to_string(),
                r.solver_label.clone(),
                h.evals.to_string(),
                sci(h.delta, 16),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

type RecordKey = (u32, usize, u64, String);

fn read_trace(path: &Path) -> Result<std::collections::HashMap<RecordKey, Vec<Improvement>>, ExperimentError> {
    let malformed = |reason: String| ExperimentError::Records { path: path.to_path_buf(), reason };
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::Reader::from_reader(file);
    let header = reader.headers().map_err(|e| malformed(e.to_string()))?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(malformed("unexpected header".into()));
    }
    let mut traces: std::collections::HashMap<RecordKey, Vec<Improvement>> = Default::default();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| malformed(e.to_string()))?;
        let bad = |what: &str| malformed(format!("row {}: bad {what}", line + 1));
        let field = |i: usize| row.get(i).unwrap_or("");
        let key = (
            field(0).parse().map_err(|_| bad("function"))?,
            field(1).parse().map_err(|_| bad("dim"))?,
            field(2).parse().map_err(|_| bad("instance"))?,
            field(3).to_string(),
        );
        let evals = field(4).parse().map_err(|_| bad("evals"))?;
        let delta = parse_float(field(5)).ok_or_else(|| bad("delta"))?;
        let trace = traces.entry(key).or_default();
        if trace.last().is_some_and(|p: &Improvement| p.evals >= evals || p.delta < delta) {
            return Err(bad("event ordering"));
        }
        trace.push(Improvement { evals, delta });
    }
    Ok(traces)
}

/// Loads the records of an experiment directory. When the improvement trace
/// is present the records are exact for every precision, otherwise only for
/// the standard ladder.
pub fn read_experiment(dir: &Path) -> Result<Vec<TrialRecord>, ExperimentError> {
    let mut records = read_records(&dir.join(RECORDS_FILE))?;
    let path = dir.join(TRACE_FILE);
    if !path.is_file() {
        return Ok(records);
    }
    let mut traces = read_trace(&path)?;
    for r in &mut records {
        let key = (r.function_id, r.dim, r.instance_seed, r.solver_label.clone());
        let trace = traces.remove(&key).unwrap_or_default();
        let consistent = trace.last().map_or(r.best_delta_final.is_infinite(), |h| {
            h.delta == r.best_delta_final && h.evals <= r.evals_total
        });
        let exact = TrialRecord { hits: trace, resolution: HitResolution::Exact, ..r.clone() };
        if !consistent || exact.ladder_hits() != r.ladder_hits() {
            return Err(ExperimentError::Records {
                path: path.clone(),
                reason: format!("trace disagrees with records for f{} d{} i{} {}", key.0, key.1, key.2, key.3),
            });
        }
        *r = exact;
    }
    if let Some(key) = traces.keys().next() {
        return Err(ExperimentError::Records {
            path,
            reason: format!("trace for f{} d{} i{} {} has no record", key.0, key.1, key.2, key.3),
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Solo(OptimizerSpec),
    Portfolio { members: Vec<OptimizerSpec>, strategy: StrategyConfig },
}

impl Solver {
    pub fn default_label(&self) -> String {
        match self {
            Solver::Solo(spec) => spec.label().to_string(),
            Solver::Portfolio { strategy, .. } => strategy.default_label(),
        }
    }

    fn members_and_strategy(&self) -> (Vec<OptimizerSpec>, StrategyConfig) {
        match self {
            Solver::Solo(spec) => (vec![spec.clone()], StrategyConfig::Unif),
            Solver::Portfolio { members, strategy } => (members.clone(), *strategy),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetScaling {
    /// `maxfev` evaluations per trial.
    Total,
    /// `maxfev * dim` evaluations per trial.
    PerDimension,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub functions: Vec<ProblemId>,
    pub dims: Vec<usize>,
    pub instances: u64,
    pub maxfev: u64,
    pub budget_scaling: BudgetScaling,
    pub solver: Solver,
    pub final_delta: f64,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub shortname: String,
    pub comments: String,
}

impl ExperimentConfig {
    /// Default suite (functions 1-10, dims 2,3,5,10,20, five instances, 10^4
    /// evaluations per trial).
    pub fn new(solver: Solver, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            functions: ProblemId::all().collect(),
            dims: vec![2, 3, 5, 10, 20],
            instances: 5,
            maxfev: 10_000,
            budget_scaling: BudgetScaling::Total,
            shortname: solver.default_label(),
            solver,
            final_delta: 1e-8,
            master_seed: 1,
            output_dir: output_dir.into(),
            comments: String::new(),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.functions.is_empty() {
            return bad("no functions selected");
        }
        if self.dims.is_empty() {
            return bad("no dimensions selected");
        }
        if let Some(d) = self.dims.iter().find(|d| !(crate::problems::MIN_DIM..=crate::problems::MAX_DIM).contains(*d)) {
            return Err(ProblemError::Dimension(*d).into());
        }
        if self.instances < 1 {
            return bad("instances must be at least 1");
        }
        if self.maxfev < 1 {
            return bad("maxfev must be at least 1");
        }
        if !(self.final_delta > 0.0) {
            return bad("final delta must be positive");
        }
        if self.shortname.is_empty() || self.shortname.contains(['/', ',', '\\']) {
            return bad("shortname must be non-empty and free of '/', '\\' and ','");
        }
        match &self.solver {
            Solver::Portfolio { members, strategy } => {
                if members.is_empty() {
                    return bad("portfolio is empty");
                }
                strategy.build()?;
            }
            Solver::Solo(_) => {}
        }
        Ok(())
    }

    pub fn budget_for(&self, dim: usize) -> u64 {
        match self.budget_scaling {
            BudgetScaling::Total => self.maxfev,
            BudgetScaling::PerDimension => self.maxfev * dim as u64,
        }
    }

    /// All trial coordinates in execution order.
    pub fn trials(&self) -> Vec<TrialKey> {
        let mut functions = self.functions.clone();
        functions.sort();
        functions.dedup();
        let mut dims = self.dims.clone();
        dims.sort();
        dims.dedup();
        let mut keys = Vec::new();
        for &f in &functions {
            for &d in &dims {
                for i in 1..=self.instances {
                    keys.push(TrialKey { function: f, dim: d, instance: i });
                }
            }
        }
        keys
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialKey {
    pub function: ProblemId,
    pub dim: usize,
    pub instance: u64,
}

pub fn mlog_file_name(label: &str, key: &TrialKey) -> String {
    format!("{label}_f{:02}_d{:02}_i{:02}.mlog.csv", key.function.function_id(), key.dim, key.instance)
}

/// Seed of one trial; depends only on the trial coordinates.
pub fn trial_seed(master_seed: u64, key: &TrialKey) -> u64 {
    seeding::derive_seed(&[master_seed, tag::TRIAL, key.function.function_id() as u64, key.dim as u64, key.instance])
}

/// Runs one trial in memory without touching the filesystem.
pub fn run_trial(config: &ExperimentConfig, key: &TrialKey) -> Result<TrialRun, ExperimentError> {
    let mut instance = ProblemInstance::new(key.function, key.dim, key.instance)?;
    let (members, strategy) = config.solver.members_and_strategy();
    Ok(run_portfolio_trial(
        &members,
        &strategy,
        &mut instance,
        config.budget_for(key.dim),
        TargetSpec::new(config.final_delta),
        trial_seed(config.master_seed, key),
        &config.shortname,
    )?)
}

/// `f1 d2 i1 EG50 evals=4321 delta=3.200e-09 0.8s`
pub fn progress_report(trial: &TrialRecord, elapsed: Duration) -> String {
    assert!(trial.best_delta_final >= 0.0, "best delta cannot be negative");
    let mut line = String::new();
    write!(
        line,
        "f{} d{} i{} {} evals={} delta={} {:.1}s",
        trial.function_id,
        trial.dim,
        trial.instance_seed,
        trial.solver_label,
        trial.evals_total,
        sci(trial.best_delta_final, 3),
        elapsed.as_secs_f64()
    )
    .expect("writing to a String cannot fail");
    line
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    pub trials: usize,
    pub successes: usize,
}

/// Runs every trial of `config` on up to `jobs` threads, writing outputs
/// under `config.output_dir`. Progress lines are handed to `progress` as
/// trials finish.
pub fn run_experiment(
    config: &ExperimentConfig,
    jobs: usize,
    progress: &(dyn Fn(&str) + Sync),
) -> Result<Summary, ExperimentError> {
    config.validate()?;
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let keys = config.trials();

    let run_one = |key: &TrialKey| -> Result<TrialRecord, ExperimentError> {
        let started = Instant::now();
        let run = run_trial(config, key)?;
        let path = dir.join(mlog_file_name(&config.shortname, key));
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut out = BufWriter::new(file);
        write_mlog(&mut out, &run.mlog).map_err(io_err(&path))?;
        out.flush().map_err(io_err(&path))?;
        progress(&progress_report(&run.record, started.elapsed()));
        Ok(run.record)
    };

    let records: Vec<TrialRecord> = if jobs <= 1 {
        keys.iter().map(run_one).collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| ExperimentError::Config(format!("cannot start worker pool: {e}")))?;
        pool.install(|| keys.par_iter().map(run_one).collect::<Result<_, _>>())?
    };

    let path = dir.join(RECORDS_FILE);
    let file = File::create(&path).map_err(io_err(&path))?;
    write_records(BufWriter::new(file), &records)
        .map_err(|e| ExperimentError::Io { path: path.clone(), source: io::Error::other(e) })?;

    let path = dir.join(TRACE_FILE);
    let file = File::create(&path).map_err(io_err(&path))?;
    write_trace(BufWriter::new(file), &records)
        .map_err(|e| ExperimentError::Io { path: path.clone(), source: io::Error::other(e) })?;

    let path = dir.join(META_FILE);
    let meta = serde_json::to_string_pretty(config).expect("config serializes");
    fs::write(&path, meta + "\n").map_err(io_err(&path))?;

    let successes = records.iter().filter(|r| r.best_delta_final <= config.final_delta).count();
    Ok(Summary { trials: records.len(), successes })
}

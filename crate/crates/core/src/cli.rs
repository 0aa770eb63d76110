//! Command-line front end: `run`, `ert` and `ecdf` subcommands.
//!
//! Exit codes: 0 on success, 1 on I/O or data errors, 2 on flag errors.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};

use crate::experiment::{self, sci, ExperimentConfig, ExperimentError, Solver, TrialRecord, RECORDS_FILE};
use crate::metrics::{self, Aggregate};
use crate::optimizers::OptimizerSpec;
use crate::portfolio::StrategyConfig;
use crate::problems::{standard_ladder, ProblemId, TargetSpec, STANDARD_TARGETS};
use crate::seeding::{self, tag};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "optfolio", version, about = "Algorithm portfolio benchmarking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a solo solver or a portfolio over the benchmark suite.
    Run(RunArgs),
    /// Expected running time per (function, dim, solver).
    Ert(ErtArgs),
    /// Bootstrapped run-length distributions per group and dimension.
    Ecdf(EcdfArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyKind {
    Unif,
    Eg,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Single optimizer: NelderMead, Powell, CG, BFGS or CMA.
    #[arg(long, conflicts_with = "portfolio")]
    solver: Option<String>,
    /// Comma-separated optimizer names.
    #[arg(long)]
    portfolio: Option<String>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyKind>,
    /// Exploration rate for `--strategy eg` (default 0.5).
    #[arg(long)]
    eps: Option<f64>,
    /// Function ids, e.g. `1-10` or `1,3,8`.
    #[arg(long, default_value = "1-10")]
    functions: String,
    #[arg(long, default_value = "2,3,5,10,20")]
    dims: String,
    #[arg(long, default_value_t = 5)]
    instances: u64,
    /// Evaluation budget per trial.
    #[arg(long, default_value_t = 10_000)]
    maxfev: u64,
    /// Multiply the budget by the dimension.
    #[arg(long)]
    maxfev_per_dim: bool,
    /// Trial stops once best - f_opt drops to this precision.
    #[arg(long, default_value_t = 1e-8)]
    final_delta: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    shortname: Option<String>,
    #[arg(long, default_value = "")]
    comments: String,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, clap::Args)]
struct ErtArgs {
    /// Directory holding a records file; repeatable.
    #[arg(long = "in", required = true)]
    input: Vec<PathBuf>,
    /// Single precision to report.
    #[arg(long, conflicts_with = "ladder")]
    delta: Option<f64>,
    /// Report this many precisions taken from the standard ladder.
    #[arg(long)]
    ladder: Option<usize>,
    /// Output directory (defaults to the first input).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct EcdfArgs {
    #[arg(long = "in", required = true)]
    input: Vec<PathBuf>,
    /// Number of targets taken from the standard ladder.
    #[arg(long, default_value_t = STANDARD_TARGETS)]
    targets: usize,
    /// Bootstrap samples per (function, target) pair.
    #[arg(long, default_value_t = metrics::DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Io(String),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(_) | ExperimentError::Problem(_) | ExperimentError::Portfolio(_) => {
                Failure::Usage(e.to_string())
            }
            ExperimentError::Io { .. } | ExperimentError::Records { .. } => Failure::Io(e.to_string()),
        }
    }
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn main_with_args<I, T>(args: I, stdout: &mut (dyn Write + Send), stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(rendered.as_bytes()) } else { stdout.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args, stdout),
        Command::Ert(args) => cmd_ert(args, stdout),
        Command::Ecdf(args) => cmd_ecdf(args, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let usage = Cli::command().render_usage();
            let _ = writeln!(stderr, "error: {msg}\n\n{usage}");
            EXIT_USAGE
        }
        Err(Failure::Io(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_IO
        }
    }
}

/// Parses `1-10`, `1,3,8` or mixtures such as `1-3,7`.
fn parse_functions(s: &str) -> Result<Vec<ProblemId>, Failure> {
    let bad = || Failure::Usage(format!("invalid --functions `{s}`"));
    let mut ids = BTreeSet::new();
    for part in s.split(',') {
        let part = part.trim();
        let (lo, hi) = match part.split_once('-') {
            Some((a, b)) => (a.trim().parse::<u32>().map_err(|_| bad())?, b.trim().parse::<u32>().map_err(|_| bad())?),
            None => {
                let v = part.parse::<u32>().map_err(|_| bad())?;
                (v, v)
            }
        };
        if lo > hi {
            return Err(bad());
        }
        for id in lo..=hi {
            ids.insert(ProblemId::new(id).map_err(|e| Failure::Usage(e.to_string()))?);
        }
    }
    Ok(ids.into_iter().collect())
}

fn parse_dims(s: &str) -> Result<Vec<usize>, Failure> {
    s.split(',')
        .map(|d| d.trim().parse::<usize>().map_err(|_| Failure::Usage(format!("invalid --dims `{s}`"))))
        .collect()
}

fn parse_spec(name: &str) -> Result<OptimizerSpec, Failure> {
    name.trim().parse().map_err(|e: crate::optimizers::OptimizerError| Failure::Usage(e.to_string()))
}

fn solver_from_args(args: &RunArgs) -> Result<Solver, Failure> {
    match (&args.solver, &args.portfolio) {
        (Some(name), None) => {
            if args.strategy.is_some() || args.eps.is_some() {
                return Err(Failure::Usage("--strategy and --eps require --portfolio".into()));
            }
            Ok(Solver::Solo(parse_spec(name)?))
        }
        (None, Some(list)) => {
            let members = list.split(',').map(parse_spec).collect::<Result<Vec<_>, _>>()?;
            let strategy = match (args.strategy, args.eps) {
                (None, _) => return Err(Failure::Usage("--portfolio requires --strategy unif|eg".into())),
                (Some(StrategyKind::Unif), Some(_)) => {
                    return Err(Failure::Usage("--eps only applies to --strategy eg".into()))
                }
                (Some(StrategyKind::Unif), None) => StrategyConfig::Unif,
                (Some(StrategyKind::Eg), eps) => {
                    let epsilon = eps.unwrap_or(0.5);
                    if !(0.0..=1.0).contains(&epsilon) {
                        return Err(Failure::Usage(format!("--eps must lie in [0, 1], got {epsilon}")));
                    }
                    StrategyConfig::EpsilonGreedy { epsilon }
                }
            };
            Ok(Solver::Portfolio { members, strategy })
        }
        (None, None) => {
            if args.strategy.is_some() {
                Err(Failure::Usage("--strategy requires --portfolio".into()))
            } else {
                Err(Failure::Usage("one of --solver or --portfolio is required".into()))
            }
        }
        (Some(_), Some(_)) => Err(Failure::Usage("--solver and --portfolio are mutually exclusive".into())),
    }
}

fn config_from_args(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let solver = solver_from_args(args)?;
    let mut config = ExperimentConfig::new(solver, &args.out);
    config.functions = parse_functions(&args.functions)?;
    config.dims = parse_dims(&args.dims)?;
    config.instances = args.instances;
    config.maxfev = args.maxfev;
    if args.maxfev_per_dim {
        config.budget_scaling = experiment::BudgetScaling::PerDimension;
    }
    config.final_delta = args.final_delta;
    config.master_seed = args.seed;
    if let Some(name) = &args.shortname {
        config.shortname = name.clone();
    }
    config.comments = args.comments.clone();
    if args.jobs < 1 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    config.validate()?;
    Ok(config)
}

fn cmd_run(args: RunArgs, stdout: &mut (dyn Write + Send)) -> Result<(), Failure> {
    let config = config_from_args(&args)?;
    let sink = std::sync::Mutex::new(&mut *stdout);
    let progress = |line: &str| {
        let mut out = sink.lock().expect("progress lock");
        let _ = writeln!(out, "{line}");
        let _ = out.flush();
    };
    let summary = experiment::run_experiment(&config, args.jobs, &progress)?;
    let _ = writeln!(
        stdout,
        "{}: {} trials, {} reached {}",
        config.shortname,
        summary.trials,
        summary.successes,
        sci(config.final_delta, 1)
    );
    Ok(())
}

fn load_records(inputs: &[PathBuf]) -> Result<Vec<TrialRecord>, Failure> {
    let mut all = Vec::new();
    for dir in inputs {
        let path = dir.join(RECORDS_FILE);
        if !path.is_file() {
            return Err(Failure::Io(format!("{}: no records file", dir.display())));
        }
        all.extend(experiment::read_experiment(dir)?);
    }
    if all.is_empty() {
        return Err(Failure::Io("records file contains no trials".into()));
    }
    Ok(all)
}

/// `n` targets taken evenly from the standard ladder; a single target means
/// the hardest one.
pub fn ladder_subset(n: usize) -> Option<Vec<TargetSpec>> {
    let ladder = standard_ladder();
    match n {
        0 => None,
        1 => Some(vec![ladder[STANDARD_TARGETS - 1]]),
        n if n <= STANDARD_TARGETS => Some(
            (0..n)
                .map(|j| ladder[((j * (STANDARD_TARGETS - 1)) as f64 / (n - 1) as f64).round() as usize])
                .collect(),
        ),
        _ => None,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn format_ert(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v}")
    }
}

type GroupKey = (u32, usize, String);

fn cmd_ert(args: ErtArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let deltas: Vec<f64> = match (args.delta, args.ladder) {
        (Some(d), None) if d > 0.0 => vec![d],
        (Some(d), None) => return Err(Failure::Usage(format!("--delta must be positive, got {d}"))),
        (None, Some(n)) => ladder_subset(n)
            .ok_or_else(|| Failure::Usage(format!("--ladder must be in 1..={STANDARD_TARGETS}")))?
            .iter()
            .map(|t| t.delta_f)
            .collect(),
        (None, None) => return Err(Failure::Usage("one of --delta or --ladder is required".into())),
        (Some(_), Some(_)) => unreachable!("clap enforces the conflict"),
    };
    let records = load_records(&args.input)?;
    let mut groups: BTreeMap<GroupKey, Vec<TrialRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.function_id, r.dim, r.solver_label.clone())).or_default().push(r);
    }
    let mut csv = String::from("function,dim,solver,delta_f,ert,n_success,n_trials\n");
    for ((function, dim, solver), trials) in &groups {
        for &delta in &deltas {
            let res = metrics::compute_ert(trials, delta).map_err(|e| Failure::Usage(e.to_string()))?;
            let ert = format_ert(res.ert);
            csv.push_str(&format!(
                "{function},{dim},{solver},{},{ert},{},{}\n",
                sci(delta, 16),
                res.n_success,
                res.n_trials
            ));
            let _ = writeln!(
                stdout,
                "function={function},dim={dim},solver={solver},delta_f={},ert={ert},n_success={},n_trials={}",
                sci(delta, 3),
                res.n_success,
                res.n_trials
            );
        }
    }
    let out = args.out.unwrap_or_else(|| args.input[0].clone());
    fs::create_dir_all(&out).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
    write_file(&out.join("ert.csv"), &csv)
}

fn label_hash(label: &str) -> u64 {
    // FNV-1a
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// ECDF file name for an aggregate and dimension.
pub fn ecdf_file_name(aggregate: Aggregate, dim: usize) -> String {
    format!("ecdf_{}_{}D.csv", aggregate.label(), dim)
}

fn cmd_ecdf(args: EcdfArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let targets = ladder_subset(args.targets)
        .ok_or_else(|| Failure::Usage(format!("--targets must be in 1..={STANDARD_TARGETS}")))?;
    if args.samples < 1 {
        return Err(Failure::Usage("--samples must be at least 1".into()));
    }
    let records = load_records(&args.input)?;
    let out = args.out.unwrap_or_else(|| args.input[0].clone());
    fs::create_dir_all(&out).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
    let dims: BTreeSet<usize> = records.iter().map(|r| r.dim).collect();
    let solvers: BTreeSet<&str> = records.iter().map(|r| r.solver_label.as_str()).collect();
    let grid = metrics::budget_grid();
    for (agg_index, aggregate) in Aggregate::all().into_iter().enumerate() {
        for &dim in &dims {
            let mut columns: Vec<(&str, metrics::EcdfCurve)> = Vec::new();
            for &solver in &solvers {
                let selected: Vec<&TrialRecord> =
                    records.iter().filter(|r| r.dim == dim && r.solver_label == solver).collect();
                let groups = metrics::group_by_function(&selected, aggregate);
                if groups.is_empty() {
                    continue;
                }
                let mut rng = seeding::stream(&[
                    args.seed,
                    tag::BOOTSTRAP,
                    agg_index as u64,
                    dim as u64,
                    label_hash(solver),
                ]);
                let curve = metrics::compute_ecdf(&groups, &targets, &grid, args.samples, &mut rng)
                    .map_err(|e| Failure::Usage(e.to_string()))?;
                columns.push((solver, curve));
            }
            if columns.is_empty() {
                continue;
            }
            let mut csv = String::from("budget_fevals_per_dim");
            for (solver, _) in &columns {
                csv.push(',');
                csv.push_str(solver);
            }
            csv.push('\n');
            for (i, b) in grid.iter().enumerate() {
                csv.push_str(&sci(*b, 16));
                for (_, curve) in &columns {
                    csv.push_str(&format!(",{}", curve.proportion[i]));
                }
                csv.push('\n');
            }
            let name = ecdf_file_name(aggregate, dim);
            write_file(&out.join(&name), &csv)?;
            let finals: Vec<String> =
                columns.iter().map(|(s, c)| format!("{s}={:.3}", c.proportion[grid.len() - 1])).collect();
            let _ = writeln!(stdout, "{name}: {}", finals.join(" "));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn function_lists() {
        let ids = |s| parse_functions(s).ok().map(|v| v.iter().map(|p| p.function_id()).collect::<Vec<_>>());
        assert_eq!(ids("1-10").unwrap().len(), 10);
        assert_eq!(ids("3,1,8").unwrap(), vec![1, 3, 8]);
        assert_eq!(ids("1-3,7").unwrap(), vec![1, 2, 3, 7]);
        assert!(ids("0-3").is_none());
        assert!(ids("5-2").is_none());
        assert!(ids("x").is_none());
    }

    #[test]
    fn ladder_subsets() {
        let full = ladder_subset(50).unwrap();
        assert_eq!(full, standard_ladder());
        assert_eq!(ladder_subset(1).unwrap()[0].delta_f, 1e-8);
        let two = ladder_subset(2).unwrap();
        assert_eq!((two[0].delta_f, two[1].delta_f), (1e2, 1e-8));
        assert!(ladder_subset(0).is_none());
        assert!(ladder_subset(51).is_none());
    }
}

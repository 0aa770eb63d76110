mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Duration;

use common::{pid, spec};
use optfolio::experiment::{
    mlog_file_name, progress_report, read_experiment, read_mlog, read_records, run_experiment, ExperimentConfig,
    HitResolution, Solver, TrialKey, MLOG_HEADER, MLOG_MAGIC, RECORDS_FILE, TRACE_FILE,
};
use optfolio::portfolio::StrategyConfig;
use optfolio::{standard_ladder, Method};

fn eg50() -> Solver {
    Solver::Portfolio {
        members: Method::ALL.iter().map(|&m| spec(m)).collect(),
        strategy: StrategyConfig::EpsilonGreedy { epsilon: 0.5 },
    }
}

fn small_config(dir: &Path, functions: &[u32]) -> ExperimentConfig {
    let mut config = ExperimentConfig::new(eg50(), dir);
    config.functions = functions.iter().map(|&f| pid(f)).collect();
    config.dims = vec![2, 3];
    config.instances = 2;
    config.maxfev = 2000;
    config
}

fn quiet(_: &str) {}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect()
}

#[test]
fn trial_counting_and_files() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = small_config(tmp.path(), &[1]);
    config.dims = vec![2];
    let summary = run_experiment(&config, 1, &quiet).unwrap();
    assert_eq!(summary.trials, 2);
    let mlogs: Vec<String> = dir_bytes(tmp.path()).into_keys().filter(|n| n.ends_with(".mlog.csv")).collect();
    assert_eq!(mlogs, vec!["EG50_f01_d02_i01.mlog.csv", "EG50_f01_d02_i02.mlog.csv"]);
    assert!(tmp.path().join("meta.json").is_file());

    let default = ExperimentConfig::new(eg50(), tmp.path());
    assert_eq!(default.trials().len(), 250);
}

#[test]
fn reruns_are_byte_identical_for_any_worker_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&small_config(a.path(), &[1, 8]), 1, &quiet).unwrap();
    run_experiment(&small_config(b.path(), &[1, 8]), 3, &quiet).unwrap();
    let (mut fa, mut fb) = (dir_bytes(a.path()), dir_bytes(b.path()));
    // the manifest echoes the output directory
    fa.remove("meta.json");
    fb.remove("meta.json");
    assert_eq!(fa, fb);
}

#[test]
fn trials_do_not_depend_on_their_neighbours() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&small_config(a.path(), &[2, 5, 9]), 1, &quiet).unwrap();
    run_experiment(&small_config(b.path(), &[5]), 1, &quiet).unwrap();
    let name = mlog_file_name("EG50", &TrialKey { function: pid(5), dim: 3, instance: 2 });
    assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
    let rec_a: Vec<_> = read_records(&a.path().join(RECORDS_FILE)).unwrap().into_iter().filter(|r| r.function_id == 5).collect();
    let rec_b = read_records(&b.path().join(RECORDS_FILE)).unwrap();
    assert_eq!(rec_a, rec_b);
}

#[test]
fn mlog_and_records_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path(), &[1, 4, 10]);
    run_experiment(&config, 1, &quiet).unwrap();
    let records = read_experiment(tmp.path()).unwrap();
    assert_eq!(records.len(), config.trials().len());
    for r in &records {
        assert_eq!(r.resolution(), HitResolution::Exact);
        let key = TrialKey { function: pid(r.function_id), dim: r.dim, instance: r.instance_seed };
        let text = fs::read_to_string(tmp.path().join(mlog_file_name("EG50", &key))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(MLOG_MAGIC));
        assert_eq!(lines.next(), Some(MLOG_HEADER));
        let rows = read_mlog(&text).unwrap();
        let last = rows.last().unwrap();
        assert_eq!(last.portfolio_best_delta, r.best_delta_final);
        assert!(rows.windows(2).all(|w| w[0].total_evals < w[1].total_evals));
        assert!(rows.windows(2).all(|w| w[1].portfolio_best_delta <= w[0].portfolio_best_delta));
        assert_eq!(last.total_evals, r.evals_total);
        for t in standard_ladder() {
            let first_row = rows.iter().find(|row| row.portfolio_best_delta <= t.delta_f);
            match (r.evals_to_target(t.delta_f), first_row) {
                (Some(e), Some(row)) => assert!(e <= row.total_evals),
                (None, None) => {}
                (Some(e), None) => panic!("hit at {e} missing from mlog"),
                (None, Some(row)) => panic!("mlog row {} reaches {} without a hit", row.round, t.delta_f),
            }
        }
    }
    // ladder-only view agrees with the exact view on every ladder target
    let ladder_only = read_records(&tmp.path().join(RECORDS_FILE)).unwrap();
    for (l, e) in ladder_only.iter().zip(&records) {
        assert_eq!(l.resolution(), HitResolution::Ladder);
        assert_eq!(l.ladder_hits(), e.ladder_hits());
        assert!(l.supports_delta(1e2) && !l.supports_delta(1e-6));
    }
}

#[test]
fn corrupt_records_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = small_config(tmp.path(), &[1]);
    config.dims = vec![2];
    run_experiment(&config, 1, &quiet).unwrap();
    let trace = tmp.path().join(TRACE_FILE);
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.pop();
    fs::write(&trace, lines.join("\n") + "\n").unwrap();
    assert!(read_experiment(tmp.path()).is_err());
    fs::write(tmp.path().join(RECORDS_FILE), "function,dim\n1,2\n").unwrap();
    assert!(read_records(&tmp.path().join(RECORDS_FILE)).is_err());
}

#[test]
fn solo_runs_use_the_method_label() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::new(Solver::Solo(spec(Method::Powell)), tmp.path());
    config.functions = vec![pid(1)];
    config.dims = vec![2];
    config.instances = 1;
    run_experiment(&config, 1, &quiet).unwrap();
    assert!(tmp.path().join("Powell_f01_d02_i01.mlog.csv").is_file());
    let r = &read_experiment(tmp.path()).unwrap()[0];
    assert_eq!(r.solver_label, "Powell");
    assert!(r.best_delta_final <= 1e-8);
}

#[test]
fn progress_line() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = small_config(tmp.path(), &[1]);
    config.dims = vec![2];
    config.instances = 1;
    let lines = std::sync::Mutex::new(Vec::new());
    run_experiment(&config, 1, &|l: &str| lines.lock().unwrap().push(l.to_string())).unwrap();
    let lines = lines.into_inner().unwrap();
    assert_eq!(lines.len(), 1);
    let r = &read_experiment(tmp.path()).unwrap()[0];
    let expected = progress_report(r, Duration::from_millis(0));
    let stem = expected.rsplit_once(' ').unwrap().0;
    assert!(lines[0].starts_with(stem), "{} vs {stem}", lines[0]);
}
